#include "rain/provenance.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace rain {

// ---------------------------------------------------------------- polynomials

namespace {

PolyPtr mk_poly(Poly p) { return std::make_shared<Poly>(std::move(p)); }

} // namespace

PolyPtr poly_atom(RowKey row, int cls) {
    Poly p;
    p.kind = Poly::Kind::Atom;
    p.row = std::move(row);
    p.cls = cls;
    return mk_poly(std::move(p));
}

PolyPtr poly_true() {
    static PolyPtr t = mk_poly(Poly{Poly::Kind::True, {}, 0, {}});
    return t;
}

PolyPtr poly_false() {
    static PolyPtr f = mk_poly(Poly{Poly::Kind::False, {}, 0, {}});
    return f;
}

PolyPtr poly_and(std::vector<PolyPtr> children) {
    std::vector<PolyPtr> flat;
    for (auto& c : children) {
        if (!c || c->kind == Poly::Kind::False) return poly_false();
        if (c->kind == Poly::Kind::True) continue;
        if (c->kind == Poly::Kind::And) {
            for (const auto& g : c->children) flat.push_back(g);
        } else {
            flat.push_back(std::move(c));
        }
    }
    // one-hot semantics: two different classes for the same row cannot co-occur
    std::vector<PolyPtr> kept;
    for (auto& c : flat) {
        if (c->kind == Poly::Kind::Atom) {
            bool dup = false;
            for (const auto& k : kept) {
                if (k->kind != Poly::Kind::Atom || !(k->row == c->row)) continue;
                if (k->cls != c->cls) return poly_false();
                dup = true;
            }
            if (dup) continue;
        }
        kept.push_back(std::move(c));
    }
    if (kept.empty()) return poly_true();
    if (kept.size() == 1) return kept[0];
    Poly p;
    p.kind = Poly::Kind::And;
    p.children = std::move(kept);
    return mk_poly(std::move(p));
}

PolyPtr poly_or(std::vector<PolyPtr> children) {
    std::vector<PolyPtr> flat;
    for (auto& c : children) {
        if (!c || c->kind == Poly::Kind::True) return poly_true();
        if (c->kind == Poly::Kind::False) continue;
        if (c->kind == Poly::Kind::Or) {
            for (const auto& g : c->children) flat.push_back(g);
        } else {
            flat.push_back(std::move(c));
        }
    }
    if (flat.empty()) return poly_false();
    if (flat.size() == 1) return flat[0];
    Poly p;
    p.kind = Poly::Kind::Or;
    p.children = std::move(flat);
    return mk_poly(std::move(p));
}

PolyPtr poly_not(PolyPtr child) {
    if (!child) return poly_true();
    if (child->kind == Poly::Kind::True) return poly_false();
    if (child->kind == Poly::Kind::False) return poly_true();
    if (child->kind == Poly::Kind::Not) return child->children[0];
    Poly p;
    p.kind = Poly::Kind::Not;
    p.children = {std::move(child)};
    return mk_poly(std::move(p));
}

bool poly_eval(const Poly& p, const ClassOf& cls) {
    switch (p.kind) {
    case Poly::Kind::Atom: return cls(p.row) == p.cls;
    case Poly::Kind::True: return true;
    case Poly::Kind::False: return false;
    case Poly::Kind::Not: return !poly_eval(*p.children[0], cls);
    case Poly::Kind::And:
        for (const auto& c : p.children)
            if (!poly_eval(*c, cls)) return false;
        return true;
    case Poly::Kind::Or:
        for (const auto& c : p.children)
            if (poly_eval(*c, cls)) return true;
        return false;
    }
    return false;
}

namespace {

void collect_rows_impl(const Poly& p, std::set<RowKey>& rows) {
    if (p.kind == Poly::Kind::Atom) {
        rows.insert(p.row);
        return;
    }
    for (const auto& c : p.children) collect_rows_impl(*c, rows);
}

void collect_atoms_impl(const Poly& p, std::set<std::pair<RowKey, int>>& atoms) {
    if (p.kind == Poly::Kind::Atom) {
        atoms.insert({p.row, p.cls});
        return;
    }
    for (const auto& c : p.children) collect_atoms_impl(*c, atoms);
}

} // namespace

void poly_collect_rows(const Poly& p, std::vector<RowKey>& rows) {
    std::set<RowKey> s;
    collect_rows_impl(p, s);
    rows.assign(s.begin(), s.end());
}

std::size_t poly_atom_count(const Poly& p) {
    std::set<std::pair<RowKey, int>> atoms;
    collect_atoms_impl(p, atoms);
    return atoms.size();
}

double AggPoly::eval(const ClassOf& cls) const {
    double sum = 0.0;
    for (const auto& t : terms)
        if (poly_eval(*t.poly, cls)) sum += t.coeff;
    if (denominator) sum /= *denominator;
    return sum;
}

namespace {

nlohmann::json poly_json(const Poly& p) {
    nlohmann::json j;
    switch (p.kind) {
    case Poly::Kind::Atom:
        j["op"] = "atom";
        j["rel"] = p.row.rel;
        j["row"] = p.row.row;
        j["class"] = p.cls;
        break;
    case Poly::Kind::True:
        j["op"] = "const";
        j["value"] = true;
        break;
    case Poly::Kind::False:
        j["op"] = "const";
        j["value"] = false;
        break;
    case Poly::Kind::Not:
        j["op"] = "not";
        j["child"] = poly_json(*p.children[0]);
        break;
    case Poly::Kind::And:
    case Poly::Kind::Or: {
        j["op"] = p.kind == Poly::Kind::And ? "and" : "or";
        auto arr = nlohmann::json::array();
        for (const auto& c : p.children) arr.push_back(poly_json(*c));
        j["children"] = std::move(arr);
        break;
    }
    }
    return j;
}

nlohmann::json agg_json(const AggPoly& a) {
    nlohmann::json j;
    j["op"] = "agg";
    j["kind"] = a.kind == AggKind::Count ? "count" : a.kind == AggKind::Sum ? "sum" : "avg";
    if (a.denominator) j["denominator"] = *a.denominator;
    auto arr = nlohmann::json::array();
    for (const auto& t : a.terms)
        arr.push_back({{"coeff", t.coeff}, {"poly", poly_json(*t.poly)}});
    j["terms"] = std::move(arr);
    return j;
}

} // namespace

std::string poly_to_json(const Poly& p) { return poly_json(p).dump(); }
std::string agg_to_json(const AggPoly& a) { return agg_json(a).dump(); }

// ---------------------------------------------------------------- view/result

const PredictionView::VRow& PredictionView::at(std::int64_t row_id) const {
    for (const auto& r : rows)
        if (r.row_id == row_id) return r;
    throw EvalError("row " + std::to_string(row_id) + " not in prediction view of " + source);
}

bool PredictionView::has(std::int64_t row_id) const {
    for (const auto& r : rows)
        if (r.row_id == row_id) return true;
    return false;
}

PredictionView build_prediction_view(const ModelState& m, const Relation& rel,
                                     const std::vector<std::string>& feature_columns,
                                     int version) {
    if (static_cast<int>(feature_columns.size()) != m.d)
        throw EvalError("build_prediction_view: feature arity mismatch");
    std::vector<int> idx;
    idx.reserve(feature_columns.size());
    for (const auto& c : feature_columns) {
        int i = rel.column_index(c);
        if (i < 0) throw EvalError("build_prediction_view: unknown column " + c);
        idx.push_back(i);
    }
    PredictionView v;
    v.model_version = version;
    v.source = rel.name;
    v.rows.reserve(rel.rows.size());
    for (const auto& row : rel.rows) {
        Eigen::VectorXd x(m.d);
        for (std::size_t k = 0; k < idx.size(); ++k) x[k] = value_as_real(row.values[idx[k]]);
        PredictionView::VRow vr;
        vr.row_id = row.id;
        vr.class_probs = predict_proba(m, x);
        // argmax with lowest-index tie break
        vr.predicted_class = 0;
        for (int c = 1; c < vr.class_probs.size(); ++c)
            if (vr.class_probs[c] > vr.class_probs[vr.predicted_class]) vr.predicted_class = c;
        v.rows.push_back(std::move(vr));
    }
    return v;
}

const ResultSet::RRow* ResultSet::find(const std::string& key) const {
    for (const auto& r : rows)
        if (r.key == key) return &r;
    return nullptr;
}

std::string result_to_csv(const ResultSet& rs) {
    std::ostringstream out;
    out << "key";
    for (const auto& c : rs.columns) out << "," << c;
    out << "\n";
    for (const auto& r : rs.rows) {
        out << r.key;
        for (const auto& v : r.values) out << "," << value_to_string(v);
        out << "\n";
    }
    return out.str();
}

const ProvenanceMap::Output* ProvenanceMap::find(const std::string& key) const {
    for (const auto& o : outputs)
        if (o.key == key) return &o;
    return nullptr;
}

std::string provenance_to_json(const ProvenanceMap& pm) {
    auto arr = nlohmann::json::array();
    for (const auto& o : pm.outputs) {
        nlohmann::json j;
        j["key"] = o.key;
        j["existence"] = poly_json(*o.existence);
        nlohmann::json aggs = nlohmann::json::object();
        for (const auto& [name, agg] : o.aggregates) aggs[name] = agg_json(agg);
        j["aggregates"] = std::move(aggs);
        arr.push_back(std::move(j));
    }
    return nlohmann::json{{"outputs", arr}}.dump(2);
}

// ------------------------------------------------------------------ execution

namespace {

bool value_less(const Value& a, const Value& b) {
    if (a.index() != b.index()) return a.index() < b.index();
    return a < b;
}

struct ExecCtx {
    const QueryPlan& plan;
    const Catalog& db;
    const Views& views;
    std::vector<const Relation*> rels;
    int classes = 2;

    int source_index(const std::string& rel) const {
        for (std::size_t i = 0; i < plan.sources.size(); ++i)
            if (plan.sources[i] == rel) return static_cast<int>(i);
        throw EvalError("relation " + rel + " not a source");
    }
};

ExecCtx make_ctx(const QueryPlan& plan, const Catalog& db, const Views& views) {
    if (!plan.checked) throw EvalError("plan must be validated before execution");
    ExecCtx ctx{plan, db, views, {}, 2};
    for (const auto& s : plan.sources) {
        auto it = db.find(s);
        if (it == db.end()) throw EvalError("relation " + s + " missing from database");
        ctx.rels.push_back(it->second);
    }
    for (const auto& t : plan.predict_terms) {
        auto it = views.find(t.source);
        if (it == views.end()) throw EvalError("missing prediction view for " + t.source);
        if (!it->second.rows.empty())
            ctx.classes = static_cast<int>(it->second.rows[0].class_probs.size());
    }
    return ctx;
}

using Combo = std::vector<const Row*>;

// assignment: overrides of predicted classes per source relation (by name)
using Assign = std::map<std::string, int>;

Value eval_expr(const ExecCtx& ctx, const Expr& e, const Combo& combo, const Assign* assign) {
    if (const auto* c = std::get_if<ColumnRef>(&e.node)) {
        int si = ctx.source_index(c->rel);
        int ci = ctx.rels[si]->column_index(c->attr);
        return combo[si]->values[ci];
    }
    if (const auto* n = std::get_if<NumberLit>(&e.node)) return n->v;
    if (const auto* p = std::get_if<PredictExpr>(&e.node)) {
        if (assign) {
            auto it = assign->find(p->rel);
            if (it != assign->end()) return static_cast<std::int64_t>(it->second);
        }
        int si = ctx.source_index(p->rel);
        return static_cast<std::int64_t>(ctx.views.at(p->rel).at(combo[si]->id).predicted_class);
    }
    if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
        double l = value_as_real(eval_expr(ctx, *b->lhs, combo, assign));
        double r = value_as_real(eval_expr(ctx, *b->rhs, combo, assign));
        switch (b->op) {
        case BinOp::Add: return l + r;
        case BinOp::Sub: return l - r;
        case BinOp::Mul: return l * r;
        }
    }
    if (const auto* pw = std::get_if<PowerExpr>(&e.node)) {
        int si = ctx.source_index(pw->exponent.rel);
        int ci = ctx.rels[si]->column_index(pw->exponent.attr);
        return std::pow(pw->base, value_as_real(combo[si]->values[ci]));
    }
    if (std::get_if<StarExpr>(&e.node)) throw EvalError("'*' cannot be evaluated");
    const auto& neg = std::get<NegExpr>(e.node);
    return -value_as_real(eval_expr(ctx, *neg.inner, combo, assign));
}

bool values_equal(const Value& a, const Value& b) {
    if (std::holds_alternative<std::string>(a) || std::holds_alternative<std::string>(b))
        return std::get<std::string>(a) == std::get<std::string>(b);
    return value_as_real(a) == value_as_real(b);
}

bool eval_cmp(CmpOp op, const Value& l, const Value& r) {
    if (op == CmpOp::Eq) return values_equal(l, r);
    if (op == CmpOp::Ne) return !values_equal(l, r);
    double a = value_as_real(l), b = value_as_real(r);
    switch (op) {
    case CmpOp::Lt: return a < b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Ge: return a >= b;
    default: return false;
    }
}

bool eval_pred(const ExecCtx& ctx, const Pred& p, const Combo& combo, const Assign* assign) {
    if (const auto* c = std::get_if<CmpPred>(&p.node))
        return eval_cmp(c->op, eval_expr(ctx, *c->lhs, combo, assign),
                        eval_expr(ctx, *c->rhs, combo, assign));
    if (const auto* l = std::get_if<LikePred>(&p.node)) {
        int si = ctx.source_index(l->col.rel);
        int ci = ctx.rels[si]->column_index(l->col.attr);
        return like_match(std::get<std::string>(combo[si]->values[ci]), l->pattern);
    }
    if (const auto* a = std::get_if<AndPred>(&p.node))
        return eval_pred(ctx, *a->lhs, combo, assign) && eval_pred(ctx, *a->rhs, combo, assign);
    if (const auto* o = std::get_if<OrPred>(&p.node))
        return eval_pred(ctx, *o->lhs, combo, assign) || eval_pred(ctx, *o->rhs, combo, assign);
    return !eval_pred(ctx, *std::get<NotPred>(p.node).inner, combo, assign);
}

void expr_predict_sources(const Expr& e, std::vector<std::string>& out) {
    if (const auto* p = std::get_if<PredictExpr>(&e.node)) {
        if (std::find(out.begin(), out.end(), p->rel) == out.end()) out.push_back(p->rel);
        return;
    }
    if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
        expr_predict_sources(*b->lhs, out);
        expr_predict_sources(*b->rhs, out);
    }
    if (const auto* n = std::get_if<NegExpr>(&e.node)) expr_predict_sources(*n->inner, out);
}

RowKey combo_row_key(const ExecCtx& ctx, const Combo& combo, const std::string& rel) {
    return RowKey{rel, combo[ctx.source_index(rel)]->id};
}

// Translate one comparison into a polynomial by enumerating class assignments
// of the PREDICT terms it mentions.
PolyPtr cmp_to_poly(const ExecCtx& ctx, const CmpPred& c, const Combo& combo) {
    std::vector<std::string> rels;
    expr_predict_sources(*c.lhs, rels);
    expr_predict_sources(*c.rhs, rels);
    if (rels.empty()) {
        return eval_cmp(c.op, eval_expr(ctx, *c.lhs, combo, nullptr),
                        eval_expr(ctx, *c.rhs, combo, nullptr))
                   ? poly_true()
                   : poly_false();
    }
    std::size_t total = 1;
    for (std::size_t i = 0; i < rels.size(); ++i) {
        total *= static_cast<std::size_t>(ctx.classes);
        if (total > 100000) throw CapError("predicate enumeration too large");
    }
    std::vector<PolyPtr> sat;
    std::vector<int> classes(rels.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::size_t rem = n;
        Assign assign;
        for (std::size_t i = 0; i < rels.size(); ++i) {
            classes[i] = static_cast<int>(rem % ctx.classes);
            rem /= ctx.classes;
            assign[rels[i]] = classes[i];
        }
        if (eval_cmp(c.op, eval_expr(ctx, *c.lhs, combo, &assign),
                     eval_expr(ctx, *c.rhs, combo, &assign))) {
            std::vector<PolyPtr> conj;
            for (std::size_t i = 0; i < rels.size(); ++i)
                conj.push_back(poly_atom(combo_row_key(ctx, combo, rels[i]), classes[i]));
            sat.push_back(poly_and(std::move(conj)));
        }
    }
    if (sat.empty()) return poly_false();
    if (sat.size() == total) return poly_true();
    return poly_or(std::move(sat));
}

PolyPtr pred_to_poly(const ExecCtx& ctx, const Pred& p, const Combo& combo) {
    if (const auto* c = std::get_if<CmpPred>(&p.node)) return cmp_to_poly(ctx, *c, combo);
    if (std::get_if<LikePred>(&p.node))
        return eval_pred(ctx, p, combo, nullptr) ? poly_true() : poly_false();
    if (const auto* a = std::get_if<AndPred>(&p.node))
        return poly_and({pred_to_poly(ctx, *a->lhs, combo), pred_to_poly(ctx, *a->rhs, combo)});
    if (const auto* o = std::get_if<OrPred>(&p.node))
        return poly_or({pred_to_poly(ctx, *o->lhs, combo), pred_to_poly(ctx, *o->rhs, combo)});
    return poly_not(pred_to_poly(ctx, *std::get<NotPred>(p.node).inner, combo));
}

// class-affine decomposition of an expression: c0 + sum coeff_i * [atom_i]
struct Affine {
    double c0 = 0.0;
    std::vector<std::pair<double, PolyPtr>> atom_terms;
};

Affine expr_to_affine(const ExecCtx& ctx, const Expr& e, const Combo& combo) {
    if (const auto* p = std::get_if<PredictExpr>(&e.node)) {
        Affine a;
        RowKey key = combo_row_key(ctx, combo, p->rel);
        for (int j = 1; j < ctx.classes; ++j)
            a.atom_terms.push_back({static_cast<double>(j), poly_atom(key, j)});
        return a;
    }
    if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
        Affine l = expr_to_affine(ctx, *b->lhs, combo);
        Affine r = expr_to_affine(ctx, *b->rhs, combo);
        Affine out;
        switch (b->op) {
        case BinOp::Add:
        case BinOp::Sub: {
            double sgn = b->op == BinOp::Add ? 1.0 : -1.0;
            out.c0 = l.c0 + sgn * r.c0;
            out.atom_terms = std::move(l.atom_terms);
            for (auto& t : r.atom_terms) out.atom_terms.push_back({sgn * t.first, t.second});
            return out;
        }
        case BinOp::Mul: {
            if (!l.atom_terms.empty() && !r.atom_terms.empty())
                throw UnsupportedError("products of two prediction terms are not supported");
            const Affine& sym = l.atom_terms.empty() ? r : l;
            double scale = l.atom_terms.empty() ? l.c0 : r.c0;
            out.c0 = sym.c0 * scale;
            for (const auto& t : sym.atom_terms) out.atom_terms.push_back({t.first * scale, t.second});
            return out;
        }
        }
    }
    if (const auto* n = std::get_if<NegExpr>(&e.node)) {
        Affine a = expr_to_affine(ctx, *n->inner, combo);
        a.c0 = -a.c0;
        for (auto& t : a.atom_terms) t.first = -t.first;
        return a;
    }
    Affine a;
    a.c0 = value_as_real(eval_expr(ctx, e, combo, nullptr));
    return a;
}

std::vector<std::string> output_columns(const ExecCtx& ctx) {
    const auto& plan = ctx.plan;
    bool star = plan.select_items.size() == 1 && plan.select_items[0].agg == AggKind::None &&
                std::get_if<StarExpr>(&plan.select_items[0].expr->node);
    std::vector<std::string> cols;
    if (star) {
        for (std::size_t si = 0; si < ctx.rels.size(); ++si)
            for (const auto& f : ctx.rels[si]->schema)
                cols.push_back(ctx.rels.size() > 1 ? plan.sources[si] + "." + f.name : f.name);
        return cols;
    }
    std::map<std::string, int> uses;
    for (const auto& item : plan.select_items) {
        switch (item.agg) {
        case AggKind::Count: uses["count"]++; break;
        case AggKind::Sum: uses["sum"]++; break;
        case AggKind::Avg: uses["avg"]++; break;
        case AggKind::None: break;
        }
    }
    for (std::size_t i = 0; i < plan.select_items.size(); ++i) {
        const auto& item = plan.select_items[i];
        std::string base;
        switch (item.agg) {
        case AggKind::None: base = print_expr(*item.expr); break;
        case AggKind::Count: base = "count"; break;
        case AggKind::Sum: base = "sum"; break;
        case AggKind::Avg: base = "avg"; break;
        }
        if (item.agg != AggKind::None && uses[base] > 1) base += "_" + std::to_string(i);
        cols.push_back(base);
    }
    return cols;
}

std::string combo_key(const ExecCtx& ctx, const Combo& combo) {
    std::string key = "r:";
    for (std::size_t i = 0; i < combo.size(); ++i) {
        if (i) key += ",";
        key += ctx.plan.sources[i] + "=" + std::to_string(combo[i]->id);
    }
    return key;
}

void for_each_combo(const ExecCtx& ctx, const std::function<void(const Combo&)>& fn) {
    Combo combo(ctx.rels.size());
    std::function<void(std::size_t)> rec = [&](std::size_t depth) {
        if (depth == ctx.rels.size()) {
            fn(combo);
            return;
        }
        for (const auto& row : ctx.rels[depth]->rows) {
            combo[depth] = &row;
            rec(depth + 1);
        }
    };
    rec(0);
}

struct GroupState {
    std::vector<Value> key_values;
    std::vector<Combo> members;        // concretely qualifying combos
    std::vector<PolyPtr> member_polys; // all candidate membership polys (debug)
};

bool plan_has_agg(const QueryPlan& plan) {
    for (const auto& item : plan.select_items)
        if (item.agg != AggKind::None) return true;
    return false;
}

const PredictExpr* single_predict_group(const QueryPlan& plan) {
    const PredictExpr* found = nullptr;
    bool has_attr = false;
    for (const auto& g : plan.group_by) {
        if (const auto* p = std::get_if<PredictExpr>(&g->node)) {
            if (found) throw UnsupportedError("multiple PREDICT terms in GROUP BY");
            found = p;
        } else {
            has_attr = true;
        }
    }
    if (found && has_attr)
        throw UnsupportedError("GROUP BY cannot mix PREDICT with plain attributes");
    return found;
}

// Shared grouping pass. Returns groups in deterministic order. For a
// PREDICT group-by, groups are the classes 0..C-1 (possibly concretely empty);
// otherwise only concretely nonempty groups exist.
std::vector<std::pair<std::string, GroupState>> compute_groups(const ExecCtx& ctx, bool debug) {
    const auto& plan = ctx.plan;
    const PredictExpr* pg = single_predict_group(plan);

    std::vector<std::pair<std::string, GroupState>> groups;
    auto find_group = [&](const std::string& key) -> GroupState& {
        for (auto& g : groups)
            if (g.first == key) return g.second;
        groups.push_back({key, {}});
        return groups.back().second;
    };

    if (pg) {
        for (int g = 0; g < ctx.classes; ++g) {
            GroupState gs;
            gs.key_values = {static_cast<std::int64_t>(g)};
            groups.push_back({"g:" + std::to_string(g), std::move(gs)});
        }
    } else if (plan.group_by.empty()) {
        groups.push_back({"agg", {}}); // the aggregate row exists even with no combos
    }

    for_each_combo(ctx, [&](const Combo& combo) {
        bool passes = !plan.where || eval_pred(ctx, *plan.where, combo, nullptr);
        PolyPtr where_poly;
        if (debug)
            where_poly = plan.where ? pred_to_poly(ctx, *plan.where, combo) : poly_true();

        if (pg) {
            RowKey key = combo_row_key(ctx, combo, pg->rel);
            int hard = ctx.views.at(pg->rel).at(key.row).predicted_class;
            for (int g = 0; g < ctx.classes; ++g) {
                GroupState& gs = groups[g].second;
                if (passes && hard == g) gs.members.push_back(combo);
                if (debug) {
                    PolyPtr member = poly_and({where_poly, poly_atom(key, g)});
                    if (member->kind != Poly::Kind::False) gs.member_polys.push_back(member);
                }
            }
            return;
        }

        std::string key;
        std::vector<Value> key_values;
        if (!plan.group_by.empty()) {
            key = "g:";
            for (std::size_t i = 0; i < plan.group_by.size(); ++i) {
                Value v = eval_expr(ctx, *plan.group_by[i], combo, nullptr);
                if (i) key += ",";
                key += value_to_string(v);
                key_values.push_back(std::move(v));
            }
        } else {
            key = "agg";
        }
        // Plain grouping keys are concrete, so a combo that fails its
        // predicate concretely can still be a symbolic candidate of its group.
        GroupState& gs = find_group(key);
        if (gs.key_values.empty()) gs.key_values = key_values;
        if (passes) gs.members.push_back(combo);
        if (debug && where_poly->kind != Poly::Kind::False) gs.member_polys.push_back(where_poly);
    });

    if (!pg && !plan.group_by.empty()) {
        std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
            const auto& av = a.second.key_values;
            const auto& bv = b.second.key_values;
            for (std::size_t i = 0; i < std::min(av.size(), bv.size()); ++i) {
                if (value_less(av[i], bv[i])) return true;
                if (value_less(bv[i], av[i])) return false;
            }
            return av.size() < bv.size();
        });
    }
    return groups;
}

// Aggregate a group concretely into output values.
std::vector<Value> group_values(const ExecCtx& ctx, const GroupState& gs, bool& suppress) {
    const auto& plan = ctx.plan;
    std::vector<Value> out;
    suppress = false;
    for (const auto& item : plan.select_items) {
        switch (item.agg) {
        case AggKind::Count:
            out.push_back(static_cast<std::int64_t>(gs.members.size()));
            break;
        case AggKind::Sum:
        case AggKind::Avg: {
            double sum = 0.0;
            for (const auto& combo : gs.members)
                sum += value_as_real(eval_expr(ctx, *item.expr, combo, nullptr));
            if (item.agg == AggKind::Avg) {
                if (gs.members.empty()) {
                    suppress = true;
                    out.push_back(0.0);
                } else {
                    out.push_back(sum / static_cast<double>(gs.members.size()));
                }
            } else {
                out.push_back(sum);
            }
            break;
        }
        case AggKind::None: {
            // value comes from the group key (validated to be in GROUP BY)
            Value v;
            bool found = false;
            for (std::size_t gi = 0; gi < plan.group_by.size(); ++gi) {
                if (expr_equal(*item.expr, *plan.group_by[gi])) {
                    v = gs.key_values[gi];
                    found = true;
                }
            }
            if (!found && !gs.members.empty())
                v = eval_expr(ctx, *item.expr, gs.members[0], nullptr);
            out.push_back(std::move(v));
            break;
        }
        }
    }
    return out;
}

} // namespace

ResultSet execute(const QueryPlan& plan, const Catalog& db, const Views& views) {
    ExecCtx ctx = make_ctx(plan, db, views);
    ResultSet rs;
    rs.columns = output_columns(ctx);

    if (!plan_has_agg(plan) && plan.group_by.empty()) {
        bool star = std::get_if<StarExpr>(&plan.select_items[0].expr->node) != nullptr;
        for_each_combo(ctx, [&](const Combo& combo) {
            if (plan.where && !eval_pred(ctx, *plan.where, combo, nullptr)) return;
            ResultSet::RRow row;
            row.key = combo_key(ctx, combo);
            if (star) {
                for (const auto* r : combo)
                    for (const auto& v : r->values) row.values.push_back(v);
            } else {
                for (const auto& item : plan.select_items)
                    row.values.push_back(eval_expr(ctx, *item.expr, combo, nullptr));
            }
            rs.rows.push_back(std::move(row));
        });
        return rs;
    }

    auto groups = compute_groups(ctx, /*debug=*/false);
    for (const auto& [key, gs] : groups) {
        if (!plan.group_by.empty() && gs.members.empty()) continue; // empty group: no tuple
        bool suppress = false;
        auto values = group_values(ctx, gs, suppress);
        if (suppress) continue; // ungrouped AVG over empty qualifying set
        rs.rows.push_back({key, std::move(values)});
    }
    return rs;
}

std::pair<ResultSet, ProvenanceMap> execute_debug(const QueryPlan& plan, const Catalog& db,
                                                  const Views& views) {
    ExecCtx ctx = make_ctx(plan, db, views);
    ResultSet rs = execute(plan, db, views);
    ProvenanceMap pm;

    if (!plan_has_agg(plan) && plan.group_by.empty()) {
        for_each_combo(ctx, [&](const Combo& combo) {
            if (plan.where && !eval_pred(ctx, *plan.where, combo, nullptr)) return;
            ProvenanceMap::Output out;
            out.key = combo_key(ctx, combo);
            out.existence = plan.where ? pred_to_poly(ctx, *plan.where, combo) : poly_true();
            pm.outputs.push_back(std::move(out));
        });
        return {std::move(rs), std::move(pm)};
    }

    const PredictExpr* pg = single_predict_group(plan);
    auto groups = compute_groups(ctx, /*debug=*/true);
    for (const auto& [key, gs] : groups) {
        ProvenanceMap::Output out;
        out.key = key;
        out.existence = plan.group_by.empty() ? poly_true() : poly_or(gs.member_polys);

        auto col_names = output_columns(ctx);
        for (std::size_t i = 0; i < plan.select_items.size(); ++i) {
            const auto& item = plan.select_items[i];
            if (item.agg == AggKind::None) continue;
            AggPoly agg;
            agg.kind = item.agg;
            if (item.agg == AggKind::Count) {
                for (const auto& mp : gs.member_polys) agg.terms.push_back({1.0, mp});
            } else {
                // SUM / AVG need the per-member value decomposition. With a
                // PREDICT group-by the value may interact with membership, so
                // combine the polys; with plain grouping membership may still
                // be symbolic through the WHERE clause.
                if (item.agg == AggKind::Avg) {
                    bool fixed = true;
                    for (const auto& mp : gs.member_polys) fixed &= mp->kind == Poly::Kind::True;
                    if (!fixed || pg)
                        throw UnsupportedError(
                            "AVG requires a prediction-independent qualifying set");
                    agg.denominator = static_cast<double>(gs.member_polys.size());
                }
                // Reconstruct the candidate combos to pair values with polys.
                std::vector<std::pair<Combo, PolyPtr>> cand;
                for_each_combo(ctx, [&](const Combo& combo) {
                    PolyPtr wp = plan.where ? pred_to_poly(ctx, *plan.where, combo) : poly_true();
                    if (pg) {
                        RowKey rk = combo_row_key(ctx, combo, pg->rel);
                        int g = std::stoi(key.substr(2));
                        wp = poly_and({wp, poly_atom(rk, g)});
                    } else if (!plan.group_by.empty()) {
                        std::string ck = "g:";
                        for (std::size_t gi = 0; gi < plan.group_by.size(); ++gi) {
                            if (gi) ck += ",";
                            ck += value_to_string(eval_expr(ctx, *plan.group_by[gi], combo, nullptr));
                        }
                        if (ck != key) wp = poly_false();
                    }
                    if (wp->kind != Poly::Kind::False) cand.push_back({combo, wp});
                });
                for (const auto& [combo, exist] : cand) {
                    Affine a = expr_to_affine(ctx, *item.expr, combo);
                    if (a.c0 != 0.0) agg.terms.push_back({a.c0, exist});
                    for (const auto& [coeff, atom] : a.atom_terms) {
                        PolyPtr p = poly_and({exist, atom});
                        if (p->kind != Poly::Kind::False && coeff != 0.0)
                            agg.terms.push_back({coeff, p});
                    }
                }
            }
            out.aggregates[col_names[i]] = std::move(agg);
        }
        pm.outputs.push_back(std::move(out));
    }
    return {std::move(rs), std::move(pm)};
}

// -------------------------------------------------------- threshold compiler

namespace {

bool interval_all(double lo, double hi, CmpOp op, double k) {
    switch (op) {
    case CmpOp::Eq: return lo == hi && lo == k;
    case CmpOp::Ne: return hi < k || lo > k;
    case CmpOp::Lt: return hi < k;
    case CmpOp::Le: return hi <= k;
    case CmpOp::Gt: return lo > k;
    case CmpOp::Ge: return lo >= k;
    }
    return false;
}

bool interval_none(double lo, double hi, CmpOp op, double k) {
    switch (op) {
    case CmpOp::Eq: return k < lo || k > hi;
    case CmpOp::Ne: return lo == hi && lo == k;
    case CmpOp::Lt: return lo >= k;
    case CmpOp::Le: return lo > k;
    case CmpOp::Gt: return hi <= k;
    case CmpOp::Ge: return hi < k;
    }
    return false;
}

} // namespace

PolyPtr compile_threshold_predicate(const AggPoly& agg, CmpOp cmp, double constant, int classes,
                                    std::size_t cap) {
    double k = constant;
    if (agg.denominator) k *= *agg.denominator; // denominator > 0, comparison preserved

    double offset = 0.0;
    bool atomic = true;
    std::set<RowKey> row_set;
    for (const auto& t : agg.terms) {
        if (t.poly->kind == Poly::Kind::True) {
            offset += t.coeff;
        } else if (t.poly->kind == Poly::Kind::False) {
            continue;
        } else if (t.poly->kind == Poly::Kind::Atom) {
            row_set.insert(t.poly->row);
        } else {
            atomic = false;
            std::vector<RowKey> rows;
            poly_collect_rows(*t.poly, rows);
            row_set.insert(rows.begin(), rows.end());
        }
    }
    std::vector<RowKey> rows(row_set.begin(), row_set.end());

    double combos = 1.0;
    for (std::size_t i = 0; i < rows.size(); ++i) combos *= classes;
    if (combos > static_cast<double>(cap))
        throw CapError("threshold compilation would enumerate " + format_double(combos) +
                       " assignments (cap " + std::to_string(cap) + ")");

    if (!atomic) {
        // generic path: plain DNF over satisfying assignments
        std::vector<int> assign(rows.size(), 0);
        std::vector<PolyPtr> sat;
        std::size_t total = static_cast<std::size_t>(combos);
        for (std::size_t n = 0; n < total; ++n) {
            std::size_t rem = n;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                assign[i] = static_cast<int>(rem % classes);
                rem /= classes;
            }
            auto cls = [&](const RowKey& rk) {
                for (std::size_t i = 0; i < rows.size(); ++i)
                    if (rows[i] == rk) return assign[i];
                throw EvalError("unbound atom row in threshold compilation");
            };
            double raw = 0.0; // undivided sum; k was already scaled by the denominator
            for (const auto& t : agg.terms)
                if (poly_eval(*t.poly, cls)) raw += t.coeff;
            if (interval_all(raw, raw, cmp, k)) {
                std::vector<PolyPtr> conj;
                for (std::size_t i = 0; i < rows.size(); ++i)
                    conj.push_back(poly_atom(rows[i], assign[i]));
                sat.push_back(poly_and(std::move(conj)));
            }
        }
        if (sat.empty()) return poly_false();
        if (sat.size() == static_cast<std::size_t>(combos)) return poly_true();
        return poly_or(std::move(sat));
    }

    // per-position contribution table
    std::vector<std::vector<double>> contrib(rows.size(), std::vector<double>(classes, 0.0));
    for (const auto& t : agg.terms) {
        if (t.poly->kind != Poly::Kind::Atom) continue;
        std::size_t pos =
            std::lower_bound(rows.begin(), rows.end(), t.poly->row) - rows.begin();
        contrib[pos][t.poly->cls] += t.coeff;
    }
    // most significant position first, so shared prefixes factor out
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto spread = [&](std::size_t p) {
        auto [mn, mx] = std::minmax_element(contrib[p].begin(), contrib[p].end());
        return *mx - *mn;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return spread(a) > spread(b); });

    std::vector<double> min_rest(order.size() + 1, 0.0), max_rest(order.size() + 1, 0.0);
    for (std::size_t i = order.size(); i-- > 0;) {
        auto [mn, mx] = std::minmax_element(contrib[order[i]].begin(), contrib[order[i]].end());
        min_rest[i] = min_rest[i + 1] + *mn;
        max_rest[i] = max_rest[i + 1] + *mx;
    }

    std::function<PolyPtr(std::size_t, double)> rec = [&](std::size_t idx, double acc) -> PolyPtr {
        double lo = acc + min_rest[idx];
        double hi = acc + max_rest[idx];
        if (interval_all(lo, hi, cmp, k)) return poly_true();
        if (interval_none(lo, hi, cmp, k)) return poly_false();
        const auto& row = rows[order[idx]];
        std::vector<PolyPtr> options;
        int true_children = 0;
        for (int c = 0; c < classes; ++c) {
            PolyPtr sub = rec(idx + 1, acc + contrib[order[idx]][c]);
            if (sub->kind == Poly::Kind::False) continue;
            if (sub->kind == Poly::Kind::True) {
                ++true_children;
                options.push_back(poly_atom(row, c));
            } else {
                options.push_back(poly_and({poly_atom(row, c), sub}));
            }
        }
        if (true_children == classes) return poly_true(); // every class works
        return poly_or(std::move(options));
    };
    return rec(0, offset);
}

// ------------------------------------------------------------- feature source

FeatureSource FeatureSource::build(const Catalog& db) {
    FeatureSource fs;
    for (const auto& [name, rel] : db) {
        auto cols = rel->feature_columns();
        std::vector<int> idx;
        for (const auto& c : cols) idx.push_back(rel->column_index(c));
        for (const auto& row : rel->rows) {
            Eigen::VectorXd x(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                x[i] = value_as_real(row.values[idx[i]]);
            fs.features[RowKey{name, row.id}] = std::move(x);
        }
    }
    return fs;
}

const Eigen::VectorXd& FeatureSource::at(const RowKey& k) const {
    auto it = features.find(k);
    if (it == features.end())
        throw EvalError("no features for row " + k.rel + "=" + std::to_string(k.row));
    return it->second;
}

} // namespace rain
