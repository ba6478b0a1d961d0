#include "rain/influence.hpp"

#include "parallel.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace rain {

QFunction qfunction_sum(std::vector<QFunction> parts) {
    if (parts.size() == 1) return parts[0];
    QFunction q;
    std::string desc;
    for (const auto& p : parts) {
        if (!desc.empty()) desc += " + ";
        desc += p.description;
    }
    q.description = desc;
    auto shared = std::make_shared<std::vector<QFunction>>(std::move(parts));
    q.value = [shared](const ModelState& m) {
        double v = 0.0;
        for (const auto& p : *shared) v += p.value(m);
        return v;
    };
    q.grad = [shared](const ModelState& m) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m.param_dim());
        for (const auto& p : *shared) g += p.grad(m);
        return g;
    };
    return q;
}

double InfluenceScores::by_id(std::int64_t id) const {
    for (std::size_t i = 0; i < record_ids.size(); ++i)
        if (record_ids[i] == id) return scores[i];
    throw EvalError("no score for record " + std::to_string(id));
}

Eigen::VectorXd solve_inverse_hvp(const ModelState& m, const TrainingSet& ts,
                                  const Eigen::VectorXd& b, const CgSettings& cg) {
    if (b.size() != m.theta.size()) throw EvalError("solve_inverse_hvp: dimension mismatch");
    double bnorm = b.norm();
    if (bnorm == 0.0) return Eigen::VectorXd::Zero(b.size());

    int max_iters = cg.max_iters > 0 ? cg.max_iters : 10 * static_cast<int>(m.theta.size());
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd hv = hvp(m, ts, v);
        if (cg.damping != 0.0) hv += cg.damping * v;
        return hv;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    Eigen::VectorXd p = r;
    double rs = r.squaredNorm();
    for (int it = 0; it < max_iters; ++it) {
        if (std::sqrt(rs) <= cg.residual_tol * bnorm) return x;
        Eigen::VectorXd hp = apply(p);
        double denom = p.dot(hp);
        if (denom <= 0.0)
            throw CgError("CG: operator not positive definite", std::sqrt(rs) / bnorm);
        double alpha = rs / denom;
        x += alpha * p;
        r -= alpha * hp;
        double rs_new = r.squaredNorm();
        p = r + (rs_new / rs) * p;
        rs = rs_new;
    }
    // recompute the true residual; rounding can make the recurrence drift
    double achieved = (apply(x) - b).norm() / bnorm;
    if (achieved <= cg.residual_tol) return x;
    throw CgError("CG did not reach tolerance " + format_double(cg.residual_tol) +
                      ", achieved " + format_double(achieved),
                  achieved);
}

InfluenceScores score_training_records(const ModelState& m, const TrainingSet& ts,
                                       const QFunction& q, const CgSettings& cg) {
    if (!m.converged) throw EvalError("score_training_records requires a converged model");
    Eigen::VectorXd g = q.grad(m);
    Eigen::VectorXd v = solve_inverse_hvp(m, ts, g, cg);
    InfluenceScores out;
    out.record_ids.resize(ts.size());
    out.scores.resize(ts.size());
    detail::parallel_chunks(ts.size(), 256, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            out.record_ids[i] = ts.records[i].id;
            out.scores[i] = -v.dot(loss_grad(m, ts.records[i]));
        }
    });
    return out;
}

InfluenceScores self_influence_scores(const ModelState& m, const TrainingSet& ts,
                                      const CgSettings& cg) {
    if (!m.converged) throw EvalError("self_influence_scores requires a converged model");
    InfluenceScores out;
    out.record_ids.resize(ts.size());
    out.scores.resize(ts.size());
    // one CG solve per record; this is the expensive baseline by construction
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out.record_ids[i] = ts.records[i].id;
        Eigen::VectorXd g = loss_grad(m, ts.records[i]);
        if (g.norm() == 0.0) {
            out.scores[i] = 0.0;
            continue;
        }
        Eigen::VectorXd v = solve_inverse_hvp(m, ts, g, cg);
        out.scores[i] = -g.dot(v);
    }
    return out;
}

InfluenceScores loss_scores(const ModelState& m, const TrainingSet& ts) {
    InfluenceScores out;
    out.record_ids.resize(ts.size());
    out.scores.resize(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        out.record_ids[i] = ts.records[i].id;
        out.scores[i] = loss_value(m, ts.records[i]);
    }
    return out;
}

std::string scores_to_csv(const InfluenceScores& s) {
    std::ostringstream out;
    out << "record_id,score\n";
    for (std::size_t i = 0; i < s.record_ids.size(); ++i)
        out << s.record_ids[i] << "," << format_double(s.scores[i]) << "\n";
    return out.str();
}

} // namespace rain
