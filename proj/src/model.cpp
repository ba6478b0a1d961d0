#include "rain/model.hpp"

#include "parallel.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <nlohmann/json.hpp>

namespace rain {

namespace {

constexpr std::size_t kChunk = 1024;

Eigen::VectorXd augment(const Eigen::VectorXd& x, bool intercept) {
    if (!intercept) return x;
    Eigen::VectorXd out(x.size() + 1);
    out.head(x.size()) = x;
    out[x.size()] = 1.0;
    return out;
}

// softmax over (0, z_1, ..., z_{C-1}); clamped so entries stay positive
Eigen::VectorXd softmax_from_logits(const Eigen::VectorXd& z_tail) {
    int c = static_cast<int>(z_tail.size()) + 1;
    Eigen::VectorXd z(c);
    z[0] = 0.0;
    z.tail(c - 1) = z_tail;
    double zmax = z.maxCoeff();
    Eigen::VectorXd e(c);
    for (int i = 0; i < c; ++i) e[i] = std::exp(std::max(z[i] - zmax, -700.0));
    return e / e.sum();
}

Eigen::VectorXd proba_at(const ModelState& m, const Eigen::VectorXd& xa) {
    int cm1 = m.classes - 1;
    int dd = m.input_dim();
    Eigen::VectorXd z(cm1);
    for (int k = 0; k < cm1; ++k) z[k] = m.theta.segment(k * dd, dd).dot(xa);
    return softmax_from_logits(z);
}

} // namespace

Eigen::VectorXd predict_proba(const ModelState& m, const Eigen::VectorXd& x) {
    if (x.size() != m.d) throw EvalError("predict_proba: feature arity mismatch");
    return proba_at(m, augment(x, m.intercept));
}

double loss_value(const ModelState& m, const TrainingRecord& z) {
    Eigen::VectorXd p = predict_proba(m, z.features);
    return -std::log(std::max(p[z.label], 1e-300));
}

Eigen::VectorXd loss_grad(const ModelState& m, const TrainingRecord& z) {
    Eigen::VectorXd xa = augment(z.features, m.intercept);
    Eigen::VectorXd p = proba_at(m, xa);
    int cm1 = m.classes - 1;
    int dd = m.input_dim();
    Eigen::VectorXd g(m.param_dim());
    for (int k = 0; k < cm1; ++k) {
        double coef = p[k + 1] - (z.label == k + 1 ? 1.0 : 0.0);
        g.segment(k * dd, dd) = coef * xa;
    }
    return g;
}

Eigen::VectorXd predict_proba_grad(const ModelState& m, const Eigen::VectorXd& x, int cls) {
    if (cls < 0 || cls >= m.classes) throw EvalError("predict_proba_grad: class out of range");
    Eigen::VectorXd xa = augment(x, m.intercept);
    Eigen::VectorXd p = proba_at(m, xa);
    int cm1 = m.classes - 1;
    int dd = m.input_dim();
    Eigen::VectorXd g(m.param_dim());
    for (int k = 0; k < cm1; ++k) {
        double coef = p[cls] * ((cls == k + 1 ? 1.0 : 0.0) - p[k + 1]);
        g.segment(k * dd, dd) = coef * xa;
    }
    return g;
}

double total_loss(const ModelState& m, const TrainingSet& ts) {
    double sum = 0.0;
    for (const auto& z : ts.records) sum += loss_value(m, z);
    return sum / static_cast<double>(ts.size()) + m.lambda * m.theta.squaredNorm();
}

Eigen::VectorXd total_loss_grad(const ModelState& m, const TrainingSet& ts) {
    std::size_t n = ts.size();
    std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<Eigen::VectorXd> partial(n_chunks, Eigen::VectorXd::Zero(m.param_dim()));
    detail::parallel_chunks(n, kChunk, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) partial[c] += loss_grad(m, ts.records[i]);
    });
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m.param_dim());
    for (const auto& part : partial) g += part;
    return g / static_cast<double>(n) + 2.0 * m.lambda * m.theta;
}

Eigen::VectorXd hvp(const ModelState& m, const TrainingSet& ts, const Eigen::VectorXd& v) {
    if (v.size() != m.theta.size()) throw EvalError("hvp: dimension mismatch");
    int cm1 = m.classes - 1;
    int dd = m.input_dim();
    std::size_t n = ts.size();
    std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<Eigen::VectorXd> partial(n_chunks, Eigen::VectorXd::Zero(v.size()));
    detail::parallel_chunks(n, kChunk, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        Eigen::VectorXd s(cm1);
        for (std::size_t i = lo; i < hi; ++i) {
            Eigen::VectorXd xa = augment(ts.records[i].features, m.intercept);
            Eigen::VectorXd p = proba_at(m, xa);
            for (int k = 0; k < cm1; ++k) s[k] = v.segment(k * dd, dd).dot(xa);
            double mean = 0.0;
            for (int k = 0; k < cm1; ++k) mean += p[k + 1] * s[k];
            for (int k = 0; k < cm1; ++k)
                partial[c].segment(k * dd, dd) += p[k + 1] * (s[k] - mean) * xa;
        }
    });
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (const auto& part : partial) out += part;
    return out / static_cast<double>(n) + 2.0 * m.lambda * v;
}

namespace {

// Dense Hessian of the total loss; training is desk-scale so O(n*(dC)^2) is fine.
Eigen::MatrixXd dense_hessian(const ModelState& m, const TrainingSet& ts) {
    int cm1 = m.classes - 1;
    int dd = m.input_dim();
    int pd = m.param_dim();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(pd, pd);
    for (const auto& z : ts.records) {
        Eigen::VectorXd xa = augment(z.features, m.intercept);
        Eigen::VectorXd p = proba_at(m, xa);
        Eigen::MatrixXd xxt = xa * xa.transpose();
        for (int k = 0; k < cm1; ++k)
            for (int l = 0; l < cm1; ++l) {
                double w = p[k + 1] * ((k == l ? 1.0 : 0.0) - p[l + 1]);
                h.block(k * dd, l * dd, dd, dd) += w * xxt;
            }
    }
    h /= static_cast<double>(ts.size());
    h += 2.0 * m.lambda * Eigen::MatrixXd::Identity(pd, pd);
    return h;
}

} // namespace

ModelState train(const TrainingSet& ts, const Hyper& hyper,
                 const std::optional<ModelState>& warm_start) {
    if (ts.size() < 1) throw DataError("train: empty training set");
    if (hyper.lambda <= 0.0) throw DataError("train: lambda must be > 0");
    if (hyper.tolerance <= 0.0) throw DataError("train: tolerance must be > 0");

    ModelState m;
    m.d = ts.dim;
    m.classes = ts.classes;
    m.lambda = hyper.lambda;
    m.intercept = hyper.fit_intercept;
    if (warm_start && warm_start->theta.size() == m.param_dim() &&
        warm_start->classes == m.classes && warm_start->intercept == m.intercept) {
        m.theta = warm_start->theta;
        m.version = warm_start->version + 1;
    } else {
        m.theta = Eigen::VectorXd::Zero(m.param_dim());
    }

    // Damped Newton with backtracking; strictly convex objective, so this is
    // globally convergent and deterministic.
    double f = total_loss(m, ts);
    for (int it = 0; it < hyper.max_iterations; ++it) {
        Eigen::VectorXd g = total_loss_grad(m, ts);
        m.grad_norm = g.lpNorm<Eigen::Infinity>();
        if (m.grad_norm <= hyper.tolerance) {
            m.converged = true;
            return m;
        }
        Eigen::MatrixXd h = dense_hessian(m, ts);
        Eigen::VectorXd step = h.ldlt().solve(g);
        double desc = g.dot(step);
        if (!(desc > 0)) step = g; // numerical fallback, gradient direction
        double t = 1.0;
        Eigen::VectorXd theta0 = m.theta;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            m.theta = theta0 - t * step;
            double f_new = total_loss(m, ts);
            if (f_new < f && f_new <= f - 1e-4 * t * desc) {
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // near the optimum the objective decrease falls below rounding;
            // the full Newton step is still a contraction there
            m.theta = theta0 - step;
            f = total_loss(m, ts);
        }
    }
    Eigen::VectorXd g = total_loss_grad(m, ts);
    m.grad_norm = g.lpNorm<Eigen::Infinity>();
    m.converged = m.grad_norm <= hyper.tolerance;
    return m;
}

std::string model_to_json(const ModelState& m) {
    nlohmann::json j;
    j["d"] = m.d;
    j["classes"] = m.classes;
    j["lambda"] = m.lambda;
    j["intercept"] = m.intercept;
    j["converged"] = m.converged;
    j["grad_norm"] = m.grad_norm;
    j["version"] = m.version;
    j["theta"] = std::vector<double>(m.theta.data(), m.theta.data() + m.theta.size());
    return j.dump(2);
}

ModelState model_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelState m;
    m.d = j.at("d").get<int>();
    m.classes = j.at("classes").get<int>();
    m.lambda = j.at("lambda").get<double>();
    m.intercept = j.at("intercept").get<bool>();
    m.converged = j.at("converged").get<bool>();
    m.grad_norm = j.at("grad_norm").get<double>();
    m.version = j.value("version", 0);
    auto th = j.at("theta").get<std::vector<double>>();
    m.theta = Eigen::Map<Eigen::VectorXd>(th.data(), static_cast<long>(th.size()));
    if (m.theta.size() != m.param_dim()) throw DataError("model json: theta size mismatch");
    return m;
}

} // namespace rain
