#include "rain/holistic.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

namespace rain {

namespace {

RelaxedPtr mk_relaxed(RelaxedExpr e) { return std::make_shared<RelaxedExpr>(std::move(e)); }

RelaxedPtr relaxed_const(double v) {
    RelaxedExpr e;
    e.kind = RelaxedExpr::Kind::Const;
    e.constant = v;
    return mk_relaxed(std::move(e));
}

// Do all children pairwise conflict on some shared row (different classes)?
// Then at most one branch can hold and OR is an exact disjoint union.
bool mutually_exclusive(const std::vector<PolyPtr>& children) {
    auto atom_map = [](const Poly& p, std::map<RowKey, int>& out) {
        if (p.kind == Poly::Kind::Atom) {
            out[p.row] = p.cls;
            return true;
        }
        if (p.kind != Poly::Kind::And) return false;
        for (const auto& c : p.children) {
            if (c->kind != Poly::Kind::Atom) return false;
            out[c->row] = c->cls;
        }
        return true;
    };
    std::vector<std::map<RowKey, int>> maps(children.size());
    for (std::size_t i = 0; i < children.size(); ++i)
        if (!atom_map(*children[i], maps[i])) return false;
    for (std::size_t i = 0; i < children.size(); ++i)
        for (std::size_t j = i + 1; j < children.size(); ++j) {
            bool conflict = false;
            for (const auto& [row, cls] : maps[i]) {
                auto it = maps[j].find(row);
                if (it != maps[j].end() && it->second != cls) conflict = true;
            }
            if (!conflict) return false;
        }
    return true;
}

} // namespace

RelaxedPtr relax_polynomial(const Poly& p, const RelaxOptions& opts) {
    switch (p.kind) {
    case Poly::Kind::True: return relaxed_const(1.0);
    case Poly::Kind::False: return relaxed_const(0.0);
    case Poly::Kind::Atom: {
        RelaxedExpr e;
        e.kind = RelaxedExpr::Kind::Prob;
        e.row = p.row;
        e.cls = p.cls;
        return mk_relaxed(std::move(e));
    }
    case Poly::Kind::Not: {
        RelaxedExpr e;
        e.kind = RelaxedExpr::Kind::Complement;
        e.children = {relax_polynomial(*p.children[0], opts)};
        return mk_relaxed(std::move(e));
    }
    case Poly::Kind::And: {
        RelaxedExpr e;
        e.kind = RelaxedExpr::Kind::Product;
        for (const auto& c : p.children) e.children.push_back(relax_polynomial(*c, opts));
        return mk_relaxed(std::move(e));
    }
    case Poly::Kind::Or: {
        if (opts.exact_or && mutually_exclusive(p.children)) {
            RelaxedExpr e;
            e.kind = RelaxedExpr::Kind::WeightedSum;
            for (const auto& c : p.children) {
                e.children.push_back(relax_polynomial(*c, opts));
                e.coeffs.push_back(1.0);
            }
            return mk_relaxed(std::move(e));
        }
        RelaxedExpr e;
        e.kind = RelaxedExpr::Kind::OrRule;
        for (const auto& c : p.children) e.children.push_back(relax_polynomial(*c, opts));
        return mk_relaxed(std::move(e));
    }
    }
    return relaxed_const(0.0);
}

RelaxedPtr relax_aggregate(const AggPoly& a, const RelaxOptions& opts) {
    RelaxedExpr e;
    e.kind = RelaxedExpr::Kind::WeightedSum;
    for (const auto& t : a.terms) {
        e.children.push_back(relax_polynomial(*t.poly, opts));
        e.coeffs.push_back(t.coeff);
    }
    if (a.denominator) e.denominator = *a.denominator;
    return mk_relaxed(std::move(e));
}

// ------------------------------------------------------------ tree evaluation

namespace {

using LeafProb = std::function<double(const RowKey&, int)>;

double forward(const RelaxedExpr& e, const LeafProb& leaf) {
    switch (e.kind) {
    case RelaxedExpr::Kind::Const: return e.constant;
    case RelaxedExpr::Kind::Prob: return leaf(e.row, e.cls);
    case RelaxedExpr::Kind::Complement: return 1.0 - forward(*e.children[0], leaf);
    case RelaxedExpr::Kind::Product: {
        double v = 1.0;
        for (const auto& c : e.children) v *= forward(*c, leaf);
        return v;
    }
    case RelaxedExpr::Kind::OrRule: {
        double v = 1.0;
        for (const auto& c : e.children) v *= 1.0 - forward(*c, leaf);
        return 1.0 - v;
    }
    case RelaxedExpr::Kind::WeightedSum: {
        double v = 0.0;
        for (std::size_t i = 0; i < e.children.size(); ++i)
            v += e.coeffs[i] * forward(*e.children[i], leaf);
        return v / e.denominator;
    }
    }
    return 0.0;
}

// Accumulates d(root)/d(leaf) for every Prob leaf.
void backward(const RelaxedExpr& e, const LeafProb& leaf, double mult,
              std::map<std::pair<RowKey, int>, double>& acc) {
    switch (e.kind) {
    case RelaxedExpr::Kind::Const: return;
    case RelaxedExpr::Kind::Prob:
        acc[{e.row, e.cls}] += mult;
        return;
    case RelaxedExpr::Kind::Complement:
        backward(*e.children[0], leaf, -mult, acc);
        return;
    case RelaxedExpr::Kind::Product: {
        std::vector<double> vals(e.children.size());
        for (std::size_t i = 0; i < e.children.size(); ++i) vals[i] = forward(*e.children[i], leaf);
        for (std::size_t i = 0; i < e.children.size(); ++i) {
            double rest = 1.0;
            for (std::size_t j = 0; j < e.children.size(); ++j)
                if (j != i) rest *= vals[j];
            backward(*e.children[i], leaf, mult * rest, acc);
        }
        return;
    }
    case RelaxedExpr::Kind::OrRule: {
        std::vector<double> vals(e.children.size());
        for (std::size_t i = 0; i < e.children.size(); ++i) vals[i] = forward(*e.children[i], leaf);
        for (std::size_t i = 0; i < e.children.size(); ++i) {
            double rest = 1.0;
            for (std::size_t j = 0; j < e.children.size(); ++j)
                if (j != i) rest *= 1.0 - vals[j];
            backward(*e.children[i], leaf, mult * rest, acc);
        }
        return;
    }
    case RelaxedExpr::Kind::WeightedSum:
        for (std::size_t i = 0; i < e.children.size(); ++i)
            backward(*e.children[i], leaf, mult * e.coeffs[i] / e.denominator, acc);
        return;
    }
}

} // namespace

double eval_relaxed_at(const RelaxedExpr& e, const ProbTable& probs) {
    return forward(e, [&](const RowKey& row, int cls) {
        auto it = probs.find(row);
        if (it == probs.end())
            throw EvalError("no probabilities for row " + row.rel + "=" + std::to_string(row.row));
        return it->second[cls];
    });
}

RelaxEval eval_relaxed(const RelaxedExpr& e, const ModelState& m, const FeatureSource& features) {
    // one predict_proba per distinct row
    std::map<RowKey, Eigen::VectorXd> cache;
    LeafProb leaf = [&](const RowKey& row, int cls) {
        auto it = cache.find(row);
        if (it == cache.end())
            it = cache.emplace(row, predict_proba(m, features.at(row))).first;
        return it->second[cls];
    };
    RelaxEval out;
    out.value = forward(e, leaf);
    std::map<std::pair<RowKey, int>, double> acc;
    backward(e, leaf, 1.0, acc);
    out.grad = Eigen::VectorXd::Zero(m.param_dim());
    for (const auto& [key, mult] : acc)
        out.grad += mult * predict_proba_grad(m, features.at(key.first), key.second);
    return out;
}

double exact_expectation(const Poly& p, const ProbTable& probs, std::size_t max_atoms) {
    if (poly_atom_count(p) > max_atoms)
        throw CapError("exact_expectation: polynomial has more than " +
                       std::to_string(max_atoms) + " atoms");
    std::vector<RowKey> rows;
    poly_collect_rows(p, rows);
    if (rows.empty()) return poly_eval(p, [](const RowKey&) { return 0; }) ? 1.0 : 0.0;

    std::vector<const Eigen::VectorXd*> rp;
    for (const auto& r : rows) {
        auto it = probs.find(r);
        if (it == probs.end())
            throw EvalError("no probabilities for row " + r.rel + "=" + std::to_string(r.row));
        rp.push_back(&it->second);
    }
    int classes = static_cast<int>(rp[0]->size());
    std::vector<int> assign(rows.size(), 0);
    double expectation = 0.0;
    std::function<void(std::size_t, double)> rec = [&](std::size_t i, double weight) {
        if (weight == 0.0) return;
        if (i == rows.size()) {
            auto cls = [&](const RowKey& rk) {
                for (std::size_t j = 0; j < rows.size(); ++j)
                    if (rows[j] == rk) return assign[j];
                throw EvalError("unbound row in exact_expectation");
            };
            if (poly_eval(p, cls)) expectation += weight;
            return;
        }
        for (int c = 0; c < classes; ++c) {
            assign[i] = c;
            rec(i + 1, weight * (*rp[i])[c]);
        }
    };
    rec(0, 1.0);
    return expectation;
}

// ----------------------------------------------------------------- complaints

std::string complaint_result_key(const Complaint& c) {
    if (c.target.tuple_key) return "r:" + *c.target.tuple_key;
    if (c.target.group_key) return "g:" + *c.target.group_key;
    return "agg";
}

namespace {

const char* kind_text(Complaint::Kind k) {
    switch (k) {
    case Complaint::Kind::Value: return "value";
    case Complaint::Kind::Tuple: return "tuple";
    case Complaint::Kind::Prediction: return "prediction";
    }
    return "?";
}

const char* op_text(CmpOp op) {
    switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
    default: return "=";
    }
}

const PredictionView& view_for(const Complaint& c, const Views& views) {
    if (c.target.rel) {
        auto it = views.find(*c.target.rel);
        if (it == views.end()) throw EvalError("no prediction view for " + *c.target.rel);
        return it->second;
    }
    if (views.size() != 1)
        throw EvalError("prediction complaint needs a 'rel' when several views exist");
    return views.begin()->second;
}

// Concrete value of a value complaint's target; a missing output row counts 0.
double concrete_value(const Complaint& c, const ResultSet& result, std::string* attr_out) {
    std::string key = complaint_result_key(c);
    const auto* row = result.find(key);
    std::string attr = c.attr;
    if (attr.empty()) {
        // unambiguous when the result has exactly one aggregate-like column
        std::vector<std::string> numeric;
        for (const auto& col : result.columns)
            if (col == "count" || col == "sum" || col == "avg" || col.rfind("count_", 0) == 0 ||
                col.rfind("sum_", 0) == 0 || col.rfind("avg_", 0) == 0)
                numeric.push_back(col);
        if (numeric.size() != 1)
            throw EvalError("value complaint needs 'attr' (result has " +
                            std::to_string(numeric.size()) + " aggregate columns)");
        attr = numeric[0];
    }
    if (attr_out) *attr_out = attr;
    if (!row) return 0.0;
    for (std::size_t i = 0; i < result.columns.size(); ++i)
        if (result.columns[i] == attr) return value_as_real(row->values[i]);
    throw EvalError("unknown output attribute '" + attr + "'");
}

} // namespace

bool complaint_satisfied(const Complaint& c, const ResultSet& result, const Views& views) {
    switch (c.kind) {
    case Complaint::Kind::Tuple:
        return result.find(complaint_result_key(c)) == nullptr;
    case Complaint::Kind::Prediction: {
        const auto& view = view_for(c, views);
        if (!c.target.row_id) throw EvalError("prediction complaint needs row_id");
        return view.at(*c.target.row_id).predicted_class == static_cast<int>(c.desired);
    }
    case Complaint::Kind::Value: {
        double v = concrete_value(c, result, nullptr);
        switch (c.op) {
        case CmpOp::Eq: return std::abs(v - c.desired) <= 1e-9;
        case CmpOp::Le: return v <= c.desired + 1e-9;
        case CmpOp::Ge: return v >= c.desired - 1e-9;
        default: throw EvalError("value complaints support =, <=, >= only");
        }
    }
    }
    return false;
}

QFunction encode_complaints(const std::vector<Complaint>& cs,
                            const std::vector<QueryDebugContext>& queries, const Views& views,
                            std::shared_ptr<const FeatureSource> features,
                            const RelaxOptions& opts) {
    struct Part {
        RelaxedPtr expr;
        double desired;
    };
    auto parts = std::make_shared<std::vector<Part>>();
    std::string desc;
    auto add_desc = [&](const std::string& s) {
        if (!desc.empty()) desc += " + ";
        desc += s;
    };

    auto context_of = [&](const Complaint& c) -> const QueryDebugContext& {
        for (const auto& q : queries)
            if (q.name == c.query || c.query.empty()) return q;
        throw EvalError("complaint refers to unknown query '" + c.query + "'");
    };

    for (const auto& c : cs) {
        switch (c.kind) {
        case Complaint::Kind::Prediction: {
            const auto& view = view_for(c, views);
            if (!c.target.row_id) throw EvalError("prediction complaint needs row_id");
            if (!view.has(*c.target.row_id))
                throw EvalError("prediction complaint: row " + std::to_string(*c.target.row_id) +
                                " not in view of " + view.source);
            RelaxedExpr leaf;
            leaf.kind = RelaxedExpr::Kind::Prob;
            leaf.row = RowKey{view.source, *c.target.row_id};
            leaf.cls = static_cast<int>(c.desired);
            int cls = static_cast<int>(c.desired);
            parts->push_back({mk_relaxed(std::move(leaf)), 1.0});
            add_desc("p(" + view.source + "=" + std::to_string(*c.target.row_id) + " -> " +
                     std::to_string(cls) + ")");
            break;
        }
        case Complaint::Kind::Tuple: {
            if (c.target.group_key)
                throw UnsupportedError(
                    "group-existence complaints are not supported (use a value complaint on the "
                    "group's count)");
            const auto& ctx = context_of(c);
            std::string key = complaint_result_key(c);
            const auto* out = ctx.prov->find(key);
            // a tuple that no longer comes out of the query is a satisfied
            // complaint; it contributes nothing until it reappears
            if (!out) {
                if (ctx.result->find(key))
                    throw EvalError("tuple complaint: no provenance for key '" + key + "'");
                continue;
            }
            parts->push_back({relax_polynomial(*out->existence, opts), 0.0});
            add_desc("drop(" + key + ")");
            break;
        }
        case Complaint::Kind::Value: {
            const auto& ctx = context_of(c);
            std::string key = complaint_result_key(c);
            const auto* out = ctx.prov->find(key);
            if (!out) throw EvalError("value complaint: no output with key '" + key + "'");
            std::string attr;
            double current = concrete_value(c, *ctx.result, &attr);
            auto agg_it = out->aggregates.find(attr);
            if (agg_it == out->aggregates.end())
                throw EvalError("value complaint: no aggregate provenance for '" + attr + "'");
            // inequality complaints only act while concretely violated
            if (c.op == CmpOp::Le && current <= c.desired + 1e-9) continue;
            if (c.op == CmpOp::Ge && current >= c.desired - 1e-9) continue;
            parts->push_back({relax_aggregate(agg_it->second, opts), c.desired});
            add_desc(key + "." + attr + " " + op_text(c.op) + " " + format_double(c.desired));
            break;
        }
        }
    }

    QFunction q;
    q.description = desc.empty() ? "(no active complaints)" : desc;
    q.value = [parts, features](const ModelState& m) {
        double total = 0.0;
        for (const auto& part : *parts) {
            RelaxEval ev = eval_relaxed(*part.expr, m, *features);
            double diff = ev.value - part.desired;
            total += diff * diff;
        }
        return total;
    };
    q.grad = [parts, features](const ModelState& m) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m.param_dim());
        for (const auto& part : *parts) {
            RelaxEval ev = eval_relaxed(*part.expr, m, *features);
            g += 2.0 * (ev.value - part.desired) * ev.grad;
        }
        return g;
    };
    return q;
}

// ----------------------------------------------------------- complaint io

std::vector<Complaint> complaints_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_array()) throw DataError("complaint file must be a JSON array");
    std::vector<Complaint> out;
    for (const auto& e : j) {
        Complaint c;
        c.query = e.value("query", "");
        std::string kind = e.at("kind").get<std::string>();
        if (kind == "value") c.kind = Complaint::Kind::Value;
        else if (kind == "tuple") c.kind = Complaint::Kind::Tuple;
        else if (kind == "prediction") c.kind = Complaint::Kind::Prediction;
        else throw DataError("unknown complaint kind '" + kind + "'");
        if (e.contains("target")) {
            const auto& t = e.at("target");
            if (t.contains("tuple_key")) c.target.tuple_key = t.at("tuple_key").get<std::string>();
            if (t.contains("group_key")) c.target.group_key = t.at("group_key").get<std::string>();
            if (t.contains("row_id")) c.target.row_id = t.at("row_id").get<std::int64_t>();
            if (t.contains("rel")) c.target.rel = t.at("rel").get<std::string>();
        }
        c.attr = e.value("attr", "");
        std::string op = e.value("op", "=");
        if (op == "=") c.op = CmpOp::Eq;
        else if (op == "<=") c.op = CmpOp::Le;
        else if (op == ">=") c.op = CmpOp::Ge;
        else throw DataError("complaint op must be =, <= or >=");
        if (e.contains("value")) c.desired = e.at("value").get<double>();
        out.push_back(std::move(c));
    }
    return out;
}

std::string complaints_to_json(const std::vector<Complaint>& cs) {
    auto arr = nlohmann::json::array();
    for (const auto& c : cs) {
        nlohmann::json e;
        if (!c.query.empty()) e["query"] = c.query;
        e["kind"] = kind_text(c.kind);
        nlohmann::json t = nlohmann::json::object();
        if (c.target.tuple_key) t["tuple_key"] = *c.target.tuple_key;
        if (c.target.group_key) t["group_key"] = *c.target.group_key;
        if (c.target.row_id) t["row_id"] = *c.target.row_id;
        if (c.target.rel) t["rel"] = *c.target.rel;
        e["target"] = std::move(t);
        if (!c.attr.empty()) e["attr"] = c.attr;
        if (c.kind == Complaint::Kind::Value) e["op"] = op_text(c.op);
        if (c.kind != Complaint::Kind::Tuple) e["value"] = c.desired;
        arr.push_back(std::move(e));
    }
    return arr.dump(2);
}

} // namespace rain
