#pragma once

#include "rain/tabular.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rain {

enum class AggKind { None, Count, Sum, Avg };
enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };
enum class BinOp { Add, Sub, Mul };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;
struct Pred;
using PredPtr = std::shared_ptr<const Pred>;

struct ColumnRef {
    std::string rel; // empty until resolved (or when unqualified in source text)
    std::string attr;
};
struct NumberLit {
    double v = 0.0;
};
struct PredictExpr {
    std::string rel;
};
struct BinaryExpr {
    BinOp op;
    ExprPtr lhs, rhs;
};
struct PowerExpr {
    double base = 0.0;
    ColumnRef exponent;
};
struct StarExpr {};
struct NegExpr {
    ExprPtr inner;
};

struct Expr {
    std::variant<ColumnRef, NumberLit, PredictExpr, BinaryExpr, PowerExpr, StarExpr, NegExpr> node;
};

struct CmpPred {
    CmpOp op;
    ExprPtr lhs, rhs;
};
struct LikePred {
    ColumnRef col;
    std::string pattern; // '%' wildcards only
};
struct AndPred {
    PredPtr lhs, rhs;
};
struct OrPred {
    PredPtr lhs, rhs;
};
struct NotPred {
    PredPtr inner;
};

struct Pred {
    std::variant<CmpPred, LikePred, AndPred, OrPred, NotPred> node;
};

struct SelectItem {
    AggKind agg = AggKind::None;
    ExprPtr expr; // StarExpr for COUNT(*) / SELECT *
};

/// A resolved PREDICT occurrence: which relation, which feature columns feed
/// the model, and (when the plan compares it to a single class constant) the
/// bound class.
struct PredictTerm {
    std::string source;
    std::vector<std::string> feature_columns;
    std::optional<int> class_binding;
};

struct QueryPlan {
    std::vector<SelectItem> select_items;
    std::vector<std::string> sources;
    PredPtr where; // may be null
    std::vector<ExprPtr> group_by;

    bool checked = false;
    std::vector<PredictTerm> predict_terms; // filled by validate_plan, one per source with PREDICT
};

using Catalog = std::map<std::string, const Relation*>;

QueryPlan parse_query(const std::string& text);
QueryPlan validate_plan(const QueryPlan& plan, const Catalog& catalog, int model_dim,
                        int model_classes);

std::string print_plan(const QueryPlan& plan);
std::string print_expr(const Expr& e);
std::string print_pred(const Pred& p);

bool expr_equal(const Expr& a, const Expr& b);
bool pred_equal(const Pred& a, const Pred& b);
bool plan_equal(const QueryPlan& a, const QueryPlan& b);

/// '%'-wildcard match used by LIKE.
bool like_match(const std::string& text, const std::string& pattern);

} // namespace rain
