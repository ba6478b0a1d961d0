#pragma once

#include "rain/model.hpp"
#include "rain/query.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rain {

// ---------------------------------------------------------------- polynomials

struct Poly;
using PolyPtr = std::shared_ptr<const Poly>;

/// Boolean provenance polynomial over prediction atoms. Atom(row, cls) is
/// "the model predicts class cls for queried row `row`".
struct Poly {
    enum class Kind { Atom, And, Or, Not, True, False };
    Kind kind = Kind::False;
    RowKey row;
    int cls = 0;
    std::vector<PolyPtr> children;
};

PolyPtr poly_atom(RowKey row, int cls);
PolyPtr poly_true();
PolyPtr poly_false();
PolyPtr poly_and(std::vector<PolyPtr> children); // folds constants, flattens
PolyPtr poly_or(std::vector<PolyPtr> children);
PolyPtr poly_not(PolyPtr child);

using ClassOf = std::function<int(const RowKey&)>;

bool poly_eval(const Poly& p, const ClassOf& cls);
void poly_collect_rows(const Poly& p, std::vector<RowKey>& rows); // distinct, sorted
std::size_t poly_atom_count(const Poly& p);                       // distinct atoms

struct AggTerm {
    double coeff = 1.0;
    PolyPtr poly;
};

/// Aggregate provenance: value = sum(coeff_i * [poly_i]) (/ denominator for AVG).
struct AggPoly {
    AggKind kind = AggKind::Count;
    std::vector<AggTerm> terms;
    std::optional<double> denominator; // set (and > 0) for AVG

    double eval(const ClassOf& cls) const;
};

std::string poly_to_json(const Poly& p);
std::string agg_to_json(const AggPoly& a);

// ---------------------------------------------------------------- view/result

struct PredictionView {
    int model_version = 0;
    std::string source;
    struct VRow {
        std::int64_t row_id = 0;
        int predicted_class = 0;
        Eigen::VectorXd class_probs;
    };
    std::vector<VRow> rows;

    const VRow& at(std::int64_t row_id) const;
    bool has(std::int64_t row_id) const;
};

using Views = std::map<std::string, PredictionView>;

PredictionView build_prediction_view(const ModelState& m, const Relation& rel,
                                     const std::vector<std::string>& feature_columns,
                                     int version = 0);

struct ResultSet {
    std::vector<std::string> columns;
    struct RRow {
        std::string key; // "agg", "g:<v,...>", or "r:<rel>=<id>,..."
        std::vector<Value> values;
    };
    std::vector<RRow> rows;

    const RRow* find(const std::string& key) const;
};

std::string result_to_csv(const ResultSet& rs);

struct ProvenanceMap {
    struct Output {
        std::string key;
        PolyPtr existence;
        std::map<std::string, AggPoly> aggregates; // by output column name
    };
    std::vector<Output> outputs;

    const Output* find(const std::string& key) const;
};

std::string provenance_to_json(const ProvenanceMap& pm);

// ------------------------------------------------------------------ execution

ResultSet execute(const QueryPlan& plan, const Catalog& db, const Views& views);
std::pair<ResultSet, ProvenanceMap> execute_debug(const QueryPlan& plan, const Catalog& db,
                                                  const Views& views);

/// Compile `agg cmp constant` into an equivalent boolean polynomial by
/// enumerating satisfying class assignments, factoring shared per-position
/// prefixes when every term is a plain atom. The enumeration refuses to
/// expand more than `cap` assignments.
PolyPtr compile_threshold_predicate(const AggPoly& agg, CmpOp cmp, double constant, int classes,
                                    std::size_t cap = 10000);

/// Model features of every row of every relation, keyed by (relation, row id).
struct FeatureSource {
    std::map<RowKey, Eigen::VectorXd> features;

    static FeatureSource build(const Catalog& db);
    const Eigen::VectorXd& at(const RowKey& k) const;
};

} // namespace rain
