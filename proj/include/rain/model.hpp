#pragma once

#include "rain/tabular.hpp"

#include <Eigen/Core>
#include <optional>
#include <string>

namespace rain {

struct Hyper {
    double lambda = 1e-3;     // L2 coefficient on the total loss, must be > 0
    double tolerance = 1e-8;  // sup-norm of the total-loss gradient
    int max_iterations = 500;
    bool fit_intercept = false;
};

/// Multinomial logistic regression with class 0 as the reference class:
/// logits are (0, theta_1·x, ..., theta_{C-1}·x), so theta has
/// (C-1)*(d + intercept) entries and the regularized Hessian is nonsingular.
/// Binary (C=2) reduces to a single sigmoid weight vector.
struct ModelState {
    Eigen::VectorXd theta;
    int d = 0;
    int classes = 2;
    double lambda = 1e-3;
    bool intercept = false;
    bool converged = false;
    double grad_norm = 0.0;
    int version = 0;

    int input_dim() const { return d + (intercept ? 1 : 0); }
    int param_dim() const { return input_dim() * (classes - 1); }
};

ModelState train(const TrainingSet& ts, const Hyper& hyper,
                 const std::optional<ModelState>& warm_start = std::nullopt);

Eigen::VectorXd predict_proba(const ModelState& m, const Eigen::VectorXd& x);

/// Cross-entropy of one record, regularizer excluded (it lives in the total loss).
double loss_value(const ModelState& m, const TrainingRecord& z);
Eigen::VectorXd loss_grad(const ModelState& m, const TrainingRecord& z);

/// d/dtheta of p_cls(x, theta), flattened like theta.
Eigen::VectorXd predict_proba_grad(const ModelState& m, const Eigen::VectorXd& x, int cls);

/// L(theta) = (1/n) sum loss + lambda*||theta||^2 and its gradient.
double total_loss(const ModelState& m, const TrainingSet& ts);
Eigen::VectorXd total_loss_grad(const ModelState& m, const TrainingSet& ts);

/// H*v for the total-loss Hessian (includes the 2*lambda*I term); O(n*d*C),
/// never materializes H. Record sums use a fixed chunk order so results are
/// bitwise identical for any RAIN_THREADS.
Eigen::VectorXd hvp(const ModelState& m, const TrainingSet& ts, const Eigen::VectorXd& v);

std::string model_to_json(const ModelState& m);
ModelState model_from_json(const std::string& text);

} // namespace rain
