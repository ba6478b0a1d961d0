#pragma once

#include "rain/model.hpp"

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace rain {

struct CgSettings {
    double residual_tol = 1e-6; // relative to ||b||
    int max_iters = -1;         // -1: 10 * |theta|
    double damping = 0.0;       // extra delta*I; lambda already regularizes
};

/// A differentiable encoding of user complaints: q(theta) and its gradient.
struct QFunction {
    std::function<double(const ModelState&)> value;
    std::function<Eigen::VectorXd(const ModelState&)> grad;
    std::string description;
};

QFunction qfunction_sum(std::vector<QFunction> parts);

struct InfluenceScores {
    std::vector<std::int64_t> record_ids; // training-set order
    std::vector<double> scores;

    double by_id(std::int64_t id) const;
};

/// Solve H v = b with conjugate gradient using only hvp calls.
/// Throws CgError when the residual tolerance is not reached.
Eigen::VectorXd solve_inverse_hvp(const ModelState& m, const TrainingSet& ts,
                                  const Eigen::VectorXd& b, const CgSettings& cg = {});

/// s(z) = -grad_q(theta*)^T H^-1 grad_loss(z, theta*): one CG solve for the
/// whole training set; removal of z changes q by about -(1/n)*s(z), so large
/// positive scores go to the top.
InfluenceScores score_training_records(const ModelState& m, const TrainingSet& ts,
                                       const QFunction& q, const CgSettings& cg = {});

/// Per-record influence on its own loss, -g^T H^-1 g (always <= 0); most
/// negative first when ranked. One CG solve per record.
InfluenceScores self_influence_scores(const ModelState& m, const TrainingSet& ts,
                                      const CgSettings& cg = {});

/// Per-record training loss at theta*.
InfluenceScores loss_scores(const ModelState& m, const TrainingSet& ts);

std::string scores_to_csv(const InfluenceScores& s);

} // namespace rain
