#include "rain/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace rain {

// ---------------------------------------------------------------- tokenizer

namespace {

enum class Tok {
    Ident, Number, String,
    Select, From, Where, Group, By, And, Or, Not, Like,
    Count, Sum, Avg, Predict, Power,
    Comma, LParen, RParen, Star, Plus, Minus, Dot,
    Eq, Ne, Lt, Le, Gt, Ge,
    End,
};

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
    std::size_t pos = 0;
};

Tok keyword_kind(std::string up) {
    if (up == "SELECT") return Tok::Select;
    if (up == "FROM") return Tok::From;
    if (up == "WHERE") return Tok::Where;
    if (up == "GROUP") return Tok::Group;
    if (up == "BY") return Tok::By;
    if (up == "AND") return Tok::And;
    if (up == "OR") return Tok::Or;
    if (up == "NOT") return Tok::Not;
    if (up == "LIKE") return Tok::Like;
    if (up == "COUNT") return Tok::Count;
    if (up == "SUM") return Tok::Sum;
    if (up == "AVG") return Tok::Avg;
    if (up == "PREDICT") return Tok::Predict;
    if (up == "POWER") return Tok::Power;
    return Tok::Ident;
}

std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string w;
            while (i < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) {
                w += s[i++];
            }
            std::string up = w;
            std::transform(up.begin(), up.end(), up.begin(),
                           [](unsigned char ch) { return std::toupper(ch); });
            out.push_back({keyword_kind(up), w, 0.0, start});
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < s.size() &&
                    std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t used = 0;
            double v = std::stod(s.substr(i), &used);
            out.push_back({Tok::Number, s.substr(i, used), v, start});
            i += used;
        } else if (c == '\'') {
            std::string w;
            ++i;
            while (i < s.size() && s[i] != '\'') w += s[i++];
            if (i >= s.size()) throw ParseError("unterminated string", start);
            ++i;
            out.push_back({Tok::String, w, 0.0, start});
        } else {
            auto two = s.substr(i, 2);
            if (two == "!=") { out.push_back({Tok::Ne, two, 0.0, start}); i += 2; continue; }
            if (two == "<=") { out.push_back({Tok::Le, two, 0.0, start}); i += 2; continue; }
            if (two == ">=") { out.push_back({Tok::Ge, two, 0.0, start}); i += 2; continue; }
            switch (c) {
            case ',': out.push_back({Tok::Comma, ",", 0.0, start}); break;
            case '(': out.push_back({Tok::LParen, "(", 0.0, start}); break;
            case ')': out.push_back({Tok::RParen, ")", 0.0, start}); break;
            case '*': out.push_back({Tok::Star, "*", 0.0, start}); break;
            case '+': out.push_back({Tok::Plus, "+", 0.0, start}); break;
            case '-': out.push_back({Tok::Minus, "-", 0.0, start}); break;
            case '.': out.push_back({Tok::Dot, ".", 0.0, start}); break;
            case '=': out.push_back({Tok::Eq, "=", 0.0, start}); break;
            case '<': out.push_back({Tok::Lt, "<", 0.0, start}); break;
            case '>': out.push_back({Tok::Gt, ">", 0.0, start}); break;
            default: throw ParseError(std::string("unexpected character '") + c + "'", start);
            }
            ++i;
        }
    }
    out.push_back({Tok::End, "", 0.0, s.size()});
    return out;
}

// ------------------------------------------------------------------- parser

template <typename T>
ExprPtr mk_expr(T node) {
    return std::make_shared<Expr>(Expr{std::move(node)});
}
template <typename T>
PredPtr mk_pred(T node) {
    return std::make_shared<Pred>(Pred{std::move(node)});
}

struct Parser {
    std::vector<Token> toks;
    std::size_t pos = 0;

    const Token& peek(int ahead = 0) const {
        std::size_t i = pos + ahead;
        return i < toks.size() ? toks[i] : toks.back();
    }
    bool accept(Tok k) {
        if (peek().kind == k) {
            ++pos;
            return true;
        }
        return false;
    }
    Token expect(Tok k, const char* what) {
        if (peek().kind != k) throw ParseError(std::string("expected ") + what, peek().pos);
        return toks[pos++];
    }

    ColumnRef parse_column_ref() {
        Token t = expect(Tok::Ident, "identifier");
        ColumnRef c;
        if (accept(Tok::Dot)) {
            c.rel = t.text;
            c.attr = expect(Tok::Ident, "attribute name").text;
        } else {
            c.attr = t.text;
        }
        return c;
    }

    ExprPtr parse_factor() {
        if (accept(Tok::Minus)) return mk_expr(NegExpr{parse_factor()});
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            ++pos;
            return mk_expr(NumberLit{t.number});
        }
        if (t.kind == Tok::Predict) {
            ++pos;
            expect(Tok::LParen, "(");
            std::string rel = expect(Tok::Ident, "relation name").text;
            expect(Tok::RParen, ")");
            return mk_expr(PredictExpr{rel});
        }
        if (t.kind == Tok::Power) {
            ++pos;
            expect(Tok::LParen, "(");
            Token base = expect(Tok::Number, "number");
            expect(Tok::Comma, ",");
            ColumnRef col = parse_column_ref();
            expect(Tok::RParen, ")");
            return mk_expr(PowerExpr{base.number, std::move(col)});
        }
        if (t.kind == Tok::LParen) {
            ++pos;
            ExprPtr e = parse_expr();
            expect(Tok::RParen, ")");
            return e;
        }
        if (t.kind == Tok::Ident) return mk_expr(parse_column_ref());
        throw ParseError("expected expression", t.pos);
    }

    ExprPtr parse_term() {
        ExprPtr e = parse_factor();
        while (peek().kind == Tok::Star) {
            ++pos;
            e = mk_expr(BinaryExpr{BinOp::Mul, e, parse_factor()});
        }
        return e;
    }

    ExprPtr parse_expr() {
        ExprPtr e = parse_term();
        for (;;) {
            if (accept(Tok::Plus)) e = mk_expr(BinaryExpr{BinOp::Add, e, parse_term()});
            else if (accept(Tok::Minus)) e = mk_expr(BinaryExpr{BinOp::Sub, e, parse_term()});
            else return e;
        }
    }

    static std::optional<CmpOp> cmp_of(Tok k) {
        switch (k) {
        case Tok::Eq: return CmpOp::Eq;
        case Tok::Ne: return CmpOp::Ne;
        case Tok::Lt: return CmpOp::Lt;
        case Tok::Le: return CmpOp::Le;
        case Tok::Gt: return CmpOp::Gt;
        case Tok::Ge: return CmpOp::Ge;
        default: return std::nullopt;
        }
    }

    PredPtr parse_primary_pred() {
        if (peek().kind == Tok::Not) {
            ++pos;
            return mk_pred(NotPred{parse_primary_pred()});
        }
        if (peek().kind == Tok::LParen) {
            // Could be a parenthesized predicate or a parenthesized expression
            // starting a comparison; try the predicate reading first.
            std::size_t save = pos;
            ++pos;
            try {
                PredPtr p = parse_pred();
                expect(Tok::RParen, ")");
                if (!cmp_of(peek().kind) && peek().kind != Tok::Plus &&
                    peek().kind != Tok::Minus && peek().kind != Tok::Star) {
                    return p;
                }
            } catch (const ParseError&) {
            }
            pos = save;
        }
        ExprPtr lhs = parse_expr();
        if (peek().kind == Tok::Like) {
            ++pos;
            const auto* col = std::get_if<ColumnRef>(&lhs->node);
            if (!col) throw ParseError("LIKE requires an attribute on the left", peek().pos);
            Token pat = expect(Tok::String, "string literal");
            return mk_pred(LikePred{*col, pat.text});
        }
        auto op = cmp_of(peek().kind);
        if (!op) throw ParseError("expected comparison operator", peek().pos);
        ++pos;
        ExprPtr rhs = parse_expr();
        return mk_pred(CmpPred{*op, lhs, rhs});
    }

    PredPtr parse_and_pred() {
        PredPtr p = parse_primary_pred();
        while (accept(Tok::And)) p = mk_pred(AndPred{p, parse_primary_pred()});
        return p;
    }

    PredPtr parse_pred() {
        PredPtr p = parse_and_pred();
        while (accept(Tok::Or)) p = mk_pred(OrPred{p, parse_and_pred()});
        return p;
    }

    SelectItem parse_select_item() {
        if (peek().kind == Tok::Star) {
            ++pos;
            return {AggKind::None, mk_expr(StarExpr{})};
        }
        if (peek().kind == Tok::Count) {
            ++pos;
            expect(Tok::LParen, "(");
            expect(Tok::Star, "*");
            expect(Tok::RParen, ")");
            return {AggKind::Count, mk_expr(StarExpr{})};
        }
        if (peek().kind == Tok::Sum || peek().kind == Tok::Avg) {
            AggKind agg = peek().kind == Tok::Sum ? AggKind::Sum : AggKind::Avg;
            ++pos;
            expect(Tok::LParen, "(");
            ExprPtr e = parse_expr();
            expect(Tok::RParen, ")");
            return {agg, e};
        }
        return {AggKind::None, parse_expr()};
    }

    QueryPlan parse_query() {
        QueryPlan plan;
        expect(Tok::Select, "SELECT");
        plan.select_items.push_back(parse_select_item());
        while (accept(Tok::Comma)) plan.select_items.push_back(parse_select_item());
        expect(Tok::From, "FROM");
        plan.sources.push_back(expect(Tok::Ident, "relation name").text);
        while (accept(Tok::Comma))
            plan.sources.push_back(expect(Tok::Ident, "relation name").text);
        if (accept(Tok::Where)) plan.where = parse_pred();
        if (peek().kind == Tok::Group) {
            ++pos;
            expect(Tok::By, "BY");
            plan.group_by.push_back(parse_expr());
            while (accept(Tok::Comma)) plan.group_by.push_back(parse_expr());
        }
        expect(Tok::End, "end of query");
        return plan;
    }
};

} // namespace

QueryPlan parse_query(const std::string& text) {
    Parser p{tokenize(text)};
    return p.parse_query();
}

// ------------------------------------------------------------------ printer

namespace {

const char* cmp_text(CmpOp op) {
    switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    }
    return "?";
}

std::string column_text(const ColumnRef& c) {
    return c.rel.empty() ? c.attr : c.rel + "." + c.attr;
}

} // namespace

std::string print_expr(const Expr& e) {
    if (const auto* c = std::get_if<ColumnRef>(&e.node)) return column_text(*c);
    if (const auto* n = std::get_if<NumberLit>(&e.node)) return format_double(n->v);
    if (const auto* p = std::get_if<PredictExpr>(&e.node)) return "PREDICT(" + p->rel + ")";
    if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
        const char* op = b->op == BinOp::Add ? " + " : b->op == BinOp::Sub ? " - " : " * ";
        return "(" + print_expr(*b->lhs) + op + print_expr(*b->rhs) + ")";
    }
    if (const auto* pw = std::get_if<PowerExpr>(&e.node))
        return "POWER(" + format_double(pw->base) + ", " + column_text(pw->exponent) + ")";
    if (std::get_if<StarExpr>(&e.node)) return "*";
    const auto& neg = std::get<NegExpr>(e.node);
    return "(-" + print_expr(*neg.inner) + ")";
}

std::string print_pred(const Pred& p) {
    if (const auto* c = std::get_if<CmpPred>(&p.node))
        return print_expr(*c->lhs) + " " + cmp_text(c->op) + " " + print_expr(*c->rhs);
    if (const auto* l = std::get_if<LikePred>(&p.node))
        return column_text(l->col) + " LIKE '" + l->pattern + "'";
    if (const auto* a = std::get_if<AndPred>(&p.node))
        return "(" + print_pred(*a->lhs) + " AND " + print_pred(*a->rhs) + ")";
    if (const auto* o = std::get_if<OrPred>(&p.node))
        return "(" + print_pred(*o->lhs) + " OR " + print_pred(*o->rhs) + ")";
    const auto& n = std::get<NotPred>(p.node);
    return "NOT (" + print_pred(*n.inner) + ")";
}

std::string print_plan(const QueryPlan& plan) {
    std::ostringstream out;
    out << "SELECT ";
    for (std::size_t i = 0; i < plan.select_items.size(); ++i) {
        if (i) out << ", ";
        const auto& it = plan.select_items[i];
        switch (it.agg) {
        case AggKind::None: out << print_expr(*it.expr); break;
        case AggKind::Count: out << "COUNT(*)"; break;
        case AggKind::Sum: out << "SUM(" << print_expr(*it.expr) << ")"; break;
        case AggKind::Avg: out << "AVG(" << print_expr(*it.expr) << ")"; break;
        }
    }
    out << " FROM ";
    for (std::size_t i = 0; i < plan.sources.size(); ++i) {
        if (i) out << ", ";
        out << plan.sources[i];
    }
    if (plan.where) out << " WHERE " << print_pred(*plan.where);
    if (!plan.group_by.empty()) {
        out << " GROUP BY ";
        for (std::size_t i = 0; i < plan.group_by.size(); ++i) {
            if (i) out << ", ";
            out << print_expr(*plan.group_by[i]);
        }
    }
    return out.str();
}

// ----------------------------------------------------------------- equality

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    if (const auto* c = std::get_if<ColumnRef>(&a.node)) {
        const auto& d = std::get<ColumnRef>(b.node);
        return c->rel == d.rel && c->attr == d.attr;
    }
    if (const auto* n = std::get_if<NumberLit>(&a.node))
        return n->v == std::get<NumberLit>(b.node).v;
    if (const auto* p = std::get_if<PredictExpr>(&a.node))
        return p->rel == std::get<PredictExpr>(b.node).rel;
    if (const auto* x = std::get_if<BinaryExpr>(&a.node)) {
        const auto& y = std::get<BinaryExpr>(b.node);
        return x->op == y.op && expr_equal(*x->lhs, *y.lhs) && expr_equal(*x->rhs, *y.rhs);
    }
    if (const auto* pw = std::get_if<PowerExpr>(&a.node)) {
        const auto& qw = std::get<PowerExpr>(b.node);
        return pw->base == qw.base && pw->exponent.rel == qw.exponent.rel &&
               pw->exponent.attr == qw.exponent.attr;
    }
    if (std::get_if<StarExpr>(&a.node)) return true;
    return expr_equal(*std::get<NegExpr>(a.node).inner, *std::get<NegExpr>(b.node).inner);
}

bool pred_equal(const Pred& a, const Pred& b) {
    if (a.node.index() != b.node.index()) return false;
    if (const auto* c = std::get_if<CmpPred>(&a.node)) {
        const auto& d = std::get<CmpPred>(b.node);
        return c->op == d.op && expr_equal(*c->lhs, *d.lhs) && expr_equal(*c->rhs, *d.rhs);
    }
    if (const auto* l = std::get_if<LikePred>(&a.node)) {
        const auto& m = std::get<LikePred>(b.node);
        return l->col.rel == m.col.rel && l->col.attr == m.col.attr && l->pattern == m.pattern;
    }
    if (const auto* x = std::get_if<AndPred>(&a.node)) {
        const auto& y = std::get<AndPred>(b.node);
        return pred_equal(*x->lhs, *y.lhs) && pred_equal(*x->rhs, *y.rhs);
    }
    if (const auto* x = std::get_if<OrPred>(&a.node)) {
        const auto& y = std::get<OrPred>(b.node);
        return pred_equal(*x->lhs, *y.lhs) && pred_equal(*x->rhs, *y.rhs);
    }
    return pred_equal(*std::get<NotPred>(a.node).inner, *std::get<NotPred>(b.node).inner);
}

bool plan_equal(const QueryPlan& a, const QueryPlan& b) {
    if (a.select_items.size() != b.select_items.size()) return false;
    for (std::size_t i = 0; i < a.select_items.size(); ++i) {
        if (a.select_items[i].agg != b.select_items[i].agg) return false;
        if (!expr_equal(*a.select_items[i].expr, *b.select_items[i].expr)) return false;
    }
    if (a.sources != b.sources) return false;
    if (static_cast<bool>(a.where) != static_cast<bool>(b.where)) return false;
    if (a.where && !pred_equal(*a.where, *b.where)) return false;
    if (a.group_by.size() != b.group_by.size()) return false;
    for (std::size_t i = 0; i < a.group_by.size(); ++i)
        if (!expr_equal(*a.group_by[i], *b.group_by[i])) return false;
    return true;
}

// --------------------------------------------------------------- validation

namespace {

struct Validator {
    const Catalog& catalog;
    const QueryPlan& plan;
    int model_dim;
    int model_classes;
    std::map<std::string, PredictTerm> terms;

    const Relation& source(const std::string& name) const {
        auto it = catalog.find(name);
        if (it == catalog.end()) throw ValidationError("unknown relation '" + name + "'");
        return *it->second;
    }

    ColumnRef resolve_column(const ColumnRef& c) const {
        if (!c.rel.empty()) {
            if (std::find(plan.sources.begin(), plan.sources.end(), c.rel) == plan.sources.end())
                throw ValidationError("relation '" + c.rel + "' not in FROM clause");
            if (source(c.rel).column_index(c.attr) < 0)
                throw ValidationError("unknown attribute '" + c.rel + "." + c.attr + "'");
            return c;
        }
        std::string found_rel;
        for (const auto& s : plan.sources) {
            if (source(s).column_index(c.attr) >= 0) {
                if (!found_rel.empty())
                    throw ValidationError("ambiguous attribute '" + c.attr + "'");
                found_rel = s;
            }
        }
        if (found_rel.empty()) throw ValidationError("unknown attribute '" + c.attr + "'");
        return {found_rel, c.attr};
    }

    ColumnKind column_kind(const ColumnRef& resolved) const {
        const Relation& r = source(resolved.rel);
        return r.schema[r.column_index(resolved.attr)].kind;
    }

    void note_predict(const std::string& rel) {
        if (std::find(plan.sources.begin(), plan.sources.end(), rel) == plan.sources.end())
            throw ValidationError("PREDICT(" + rel + "): relation not in FROM clause");
        if (terms.count(rel)) return;
        auto feats = source(rel).feature_columns();
        if (static_cast<int>(feats.size()) != model_dim)
            throw ValidationError("PREDICT(" + rel + "): relation has " +
                                  std::to_string(feats.size()) + " feature columns, model expects " +
                                  std::to_string(model_dim));
        terms[rel] = PredictTerm{rel, std::move(feats), std::nullopt};
    }

    // Rewrites column refs to qualified form; returns whether the expression
    // mentions a PREDICT term. `text_ok` marks contexts where a text column
    // is acceptable.
    ExprPtr check_expr(const ExprPtr& e, bool& has_predict, bool text_ok = false) {
        if (const auto* c = std::get_if<ColumnRef>(&e->node)) {
            ColumnRef r = resolve_column(*c);
            if (!text_ok && column_kind(r) == ColumnKind::Text)
                throw ValidationError("text attribute '" + r.attr + "' in numeric context");
            return mk_expr(std::move(r));
        }
        if (std::get_if<NumberLit>(&e->node)) return e;
        if (const auto* p = std::get_if<PredictExpr>(&e->node)) {
            note_predict(p->rel);
            has_predict = true;
            return e;
        }
        if (const auto* b = std::get_if<BinaryExpr>(&e->node)) {
            ExprPtr l = check_expr(b->lhs, has_predict);
            ExprPtr r = check_expr(b->rhs, has_predict);
            return mk_expr(BinaryExpr{b->op, l, r});
        }
        if (const auto* pw = std::get_if<PowerExpr>(&e->node)) {
            ColumnRef r = resolve_column(pw->exponent);
            if (column_kind(r) == ColumnKind::Text)
                throw ValidationError("POWER exponent must be numeric");
            return mk_expr(PowerExpr{pw->base, std::move(r)});
        }
        if (std::get_if<StarExpr>(&e->node))
            throw ValidationError("'*' is only valid as SELECT * or COUNT(*)");
        const auto& neg = std::get<NegExpr>(e->node);
        return mk_expr(NegExpr{check_expr(neg.inner, has_predict)});
    }

    void check_class_constant(const ExprPtr& predict_side, const ExprPtr& const_side, CmpOp op) {
        const auto* p = std::get_if<PredictExpr>(&predict_side->node);
        const auto* n = std::get_if<NumberLit>(&const_side->node);
        if (!p || !n) return;
        if (op != CmpOp::Eq && op != CmpOp::Ne) return;
        double v = n->v;
        if (v != std::floor(v) || v < 0 || v >= model_classes)
            throw ValidationError("class constant " + format_double(v) + " out of range [0, " +
                                  std::to_string(model_classes) + ")");
        if (op == CmpOp::Eq && !terms[p->rel].class_binding)
            terms[p->rel].class_binding = static_cast<int>(v);
    }

    PredPtr check_pred(const PredPtr& p) {
        if (const auto* c = std::get_if<CmpPred>(&p->node)) {
            bool lp = false, rp = false;
            ExprPtr l = check_expr(c->lhs, lp, true);
            ExprPtr r = check_expr(c->rhs, rp, true);
            bool l_text = is_text(l), r_text = is_text(r);
            if (l_text != r_text) throw ValidationError("comparison mixes text and numeric");
            if (l_text && c->op != CmpOp::Eq && c->op != CmpOp::Ne)
                throw ValidationError("text attributes support only = and !=");
            check_class_constant(l, r, c->op);
            check_class_constant(r, l, c->op);
            return mk_pred(CmpPred{c->op, l, r});
        }
        if (const auto* l = std::get_if<LikePred>(&p->node)) {
            ColumnRef r = resolve_column(l->col);
            if (column_kind(r) != ColumnKind::Text)
                throw ValidationError("LIKE requires a text attribute");
            return mk_pred(LikePred{std::move(r), l->pattern});
        }
        if (const auto* a = std::get_if<AndPred>(&p->node))
            return mk_pred(AndPred{check_pred(a->lhs), check_pred(a->rhs)});
        if (const auto* o = std::get_if<OrPred>(&p->node))
            return mk_pred(OrPred{check_pred(o->lhs), check_pred(o->rhs)});
        const auto& n = std::get<NotPred>(p->node);
        return mk_pred(NotPred{check_pred(n.inner)});
    }

    bool is_text(const ExprPtr& e) const {
        if (const auto* c = std::get_if<ColumnRef>(&e->node))
            return column_kind(*c) == ColumnKind::Text;
        return false;
    }
};

} // namespace

QueryPlan validate_plan(const QueryPlan& plan, const Catalog& catalog, int model_dim,
                        int model_classes) {
    Validator v{catalog, plan, model_dim, model_classes, {}};

    std::set<std::string> seen;
    for (const auto& s : plan.sources) {
        v.source(s);
        if (!seen.insert(s).second)
            throw ValidationError("relation '" + s + "' listed twice in FROM");
    }

    QueryPlan out;
    out.sources = plan.sources;

    bool has_agg = false;
    for (const auto& item : plan.select_items) has_agg |= item.agg != AggKind::None;

    for (const auto& g : plan.group_by) {
        bool has_predict = false;
        ExprPtr checked = v.check_expr(g, has_predict, true);
        if (!std::get_if<ColumnRef>(&checked->node) && !std::get_if<PredictExpr>(&checked->node))
            throw ValidationError("GROUP BY supports attributes and PREDICT terms only");
        out.group_by.push_back(checked);
    }

    for (const auto& item : plan.select_items) {
        if (std::get_if<StarExpr>(&item.expr->node)) {
            if (item.agg == AggKind::None && (has_agg || !plan.group_by.empty()))
                throw ValidationError("SELECT * cannot mix with aggregates or GROUP BY");
            out.select_items.push_back(item);
            continue;
        }
        bool has_predict = false;
        ExprPtr checked = v.check_expr(item.expr, has_predict, item.agg == AggKind::None);
        if (item.agg == AggKind::None && has_agg) {
            bool in_group = false;
            for (const auto& g : out.group_by) in_group |= expr_equal(*checked, *g);
            if (!in_group)
                throw ValidationError("non-aggregate select item must appear in GROUP BY");
        }
        out.select_items.push_back({item.agg, checked});
    }

    if (plan.where) out.where = v.check_pred(plan.where);

    out.checked = true;
    for (auto& [rel, term] : v.terms) out.predict_terms.push_back(std::move(term));
    return out;
}

bool like_match(const std::string& text, const std::string& pattern) {
    // '%' matches any run of characters; everything else is literal
    std::size_t ti = 0, pi = 0;
    std::size_t star_p = std::string::npos, star_t = 0;
    while (ti < text.size()) {
        if (pi < pattern.size() && pattern[pi] == '%') {
            star_p = ++pi;
            star_t = ti;
        } else if (pi < pattern.size() && pattern[pi] == text[ti]) {
            ++pi;
            ++ti;
        } else if (star_p != std::string::npos) {
            pi = star_p;
            ti = ++star_t;
        } else {
            return false;
        }
    }
    while (pi < pattern.size() && pattern[pi] == '%') ++pi;
    return pi == pattern.size();
}

} // namespace rain
