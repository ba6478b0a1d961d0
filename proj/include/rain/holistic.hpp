#pragma once

#include "rain/influence.hpp"
#include "rain/provenance.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rain {

// ------------------------------------------------------------- relaxed exprs

struct RelaxedExpr;
using RelaxedPtr = std::shared_ptr<const RelaxedExpr>;

/// Differentiable surrogate of a provenance polynomial: atoms become class
/// probabilities, AND -> x*y, OR -> 1-(1-x)(1-y), NOT -> 1-x, aggregates
/// become weighted sums. Boolean-rooted subtrees stay in [0,1] when leaves do.
struct RelaxedExpr {
    enum class Kind { Prob, Product, OrRule, Complement, WeightedSum, Const };
    Kind kind = Kind::Const;
    RowKey row; // Prob
    int cls = 0;
    double constant = 0.0; // Const
    std::vector<RelaxedPtr> children;
    std::vector<double> coeffs; // WeightedSum
    double denominator = 1.0;   // WeightedSum
};

struct RelaxOptions {
    /// Replace OR over mutually exclusive branches (e.g. prediction-equality
    /// joins) by the exact sum instead of the mechanical complement-product.
    bool exact_or = false;
};

RelaxedPtr relax_polynomial(const Poly& p, const RelaxOptions& opts = {});
RelaxedPtr relax_aggregate(const AggPoly& a, const RelaxOptions& opts = {});

/// Leaf probabilities per row: vector of length C.
using ProbTable = std::map<RowKey, Eigen::VectorXd>;

/// Evaluate at fixed leaf probabilities (no model, no gradient).
double eval_relaxed_at(const RelaxedExpr& e, const ProbTable& probs);

struct RelaxEval {
    double value = 0.0;
    Eigen::VectorXd grad; // w.r.t. theta
};

/// Tree evaluation with p(theta) from the classifier; gradient by chain rule
/// through the tree and through predict_proba.
RelaxEval eval_relaxed(const RelaxedExpr& e, const ModelState& m, const FeatureSource& features);

/// Exact expectation by enumerating all class assignments of the involved
/// rows (<= max_atoms distinct atoms, else CapError).
double exact_expectation(const Poly& p, const ProbTable& probs, std::size_t max_atoms = 20);

// ----------------------------------------------------------------- complaints

struct ComplaintTarget {
    std::optional<std::string> tuple_key; // without the "r:" prefix
    std::optional<std::string> group_key; // without the "g:" prefix
    std::optional<std::int64_t> row_id;   // prediction complaints
    std::optional<std::string> rel;       // with row_id when several views exist
};

struct Complaint {
    enum class Kind { Value, Tuple, Prediction };
    Kind kind = Kind::Value;
    std::string query;        // name of the query the complaint refers to
    ComplaintTarget target;
    std::string attr;         // value complaints: output column (may be empty if unambiguous)
    CmpOp op = CmpOp::Eq;     // value complaints: =, <=, >=
    double desired = 0.0;     // value: target value; prediction: class label
};

std::vector<Complaint> complaints_from_json(const std::string& text);
std::string complaints_to_json(const std::vector<Complaint>& cs);

/// The ResultSet / ProvenanceMap key the complaint points at.
std::string complaint_result_key(const Complaint& c);

/// Concrete (non-relaxed) check against the executed result / views.
bool complaint_satisfied(const Complaint& c, const ResultSet& result, const Views& views);

/// Everything of one query's debug pass a complaint encoder needs.
struct QueryDebugContext {
    std::string name;
    const ProvenanceMap* prov = nullptr;
    const ResultSet* result = nullptr;
};

/// Translate complaints into q(theta) = sum of squared violations: value
/// complaints (r_q - X)^2, tuple complaints r_q^2, prediction complaints
/// (p_c - 1)^2. Inequality complaints contribute only while the concrete
/// value violates them (activation is fixed at encode time, i.e. once per
/// train-rank-fix iteration).
QFunction encode_complaints(const std::vector<Complaint>& cs,
                            const std::vector<QueryDebugContext>& queries, const Views& views,
                            std::shared_ptr<const FeatureSource> features,
                            const RelaxOptions& opts = {});

} // namespace rain
