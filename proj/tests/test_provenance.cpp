#include "rain/provenance.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace rain;
using namespace rain::testing;

namespace {

Relation feature_relation(const std::string& name, const std::vector<Eigen::VectorXd>& rows) {
    Relation rel;
    rel.name = name;
    rel.id_column = "id";
    rel.schema.push_back({"id", ColumnKind::Integer});
    int d = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    for (int i = 0; i < d; ++i) rel.schema.push_back({"x" + std::to_string(i), ColumnKind::Real});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Row row;
        row.id = static_cast<std::int64_t>(i);
        row.values.push_back(static_cast<std::int64_t>(i));
        for (int c = 0; c < d; ++c) row.values.push_back(rows[i][c]);
        rel.rows.push_back(std::move(row));
    }
    return rel;
}

// view with forced hard predictions (probs consistent with the class)
PredictionView forced_view(const std::string& rel, const std::vector<int>& classes, int C) {
    PredictionView v;
    v.source = rel;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        PredictionView::VRow row;
        row.row_id = static_cast<std::int64_t>(i);
        row.predicted_class = classes[i];
        row.class_probs = Eigen::VectorXd::Constant(C, 0.1 / (C - 1));
        row.class_probs[classes[i]] = 0.9;
        row.class_probs /= row.class_probs.sum();
        v.rows.push_back(std::move(row));
    }
    return v;
}

ClassOf class_of(const Views& views) {
    return [&views](const RowKey& k) { return views.at(k.rel).at(k.row).predicted_class; };
}

} // namespace

TEST_CASE("prediction view from a zero model is uniform with class 0") {
    ModelState m;
    m.d = 2;
    m.classes = 4;
    m.theta = Eigen::VectorXd::Zero(m.param_dim());
    m.converged = true;
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(2, 1.0)});
    PredictionView v = build_prediction_view(m, rel, rel.feature_columns());
    REQUIRE(v.rows.size() == 1);
    CHECK(v.rows[0].predicted_class == 0); // lowest-index tie break
    for (int c = 0; c < 4; ++c) CHECK(v.rows[0].class_probs[c] == doctest::Approx(0.25));
}

TEST_CASE("prediction view on an empty relation is empty") {
    ModelState m;
    m.d = 1;
    m.classes = 2;
    m.theta = Eigen::VectorXd::Zero(1);
    Relation rel = feature_relation("R", {});
    rel.schema.push_back({"x0", ColumnKind::Real});
    PredictionView v = build_prediction_view(m, rel, {"x0"});
    CHECK(v.rows.empty());
}

TEST_CASE("count over a prediction filter counts hard predictions") {
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(1, 0.0),
                                          Eigen::VectorXd::Constant(1, 1.0),
                                          Eigen::VectorXd::Constant(1, 2.0)});
    Catalog db{{"R", &rel}};
    Views views{{"R", forced_view("R", {1, 0, 1}, 2)}};
    QueryPlan plan = validate_plan(parse_query("SELECT COUNT(*) FROM R WHERE PREDICT(R) = 1"),
                                   db, 1, 2);
    ResultSet rs = execute(plan, db, views);
    REQUIRE(rs.rows.size() == 1);
    CHECK(std::get<std::int64_t>(rs.rows[0].values[0]) == 2);

    auto [rs2, pm] = execute_debug(plan, db, views);
    CHECK(rs2.rows.size() == 1);
    const auto* out = pm.find("agg");
    REQUIRE(out);
    const AggPoly& agg = out->aggregates.at("count");
    REQUIRE(agg.terms.size() == 3); // one unit term per candidate row
    for (const auto& t : agg.terms) {
        CHECK(t.coeff == 1.0);
        CHECK(t.poly->kind == Poly::Kind::Atom);
        CHECK(t.poly->cls == 1);
    }
    CHECK(agg.eval(class_of(views)) == doctest::Approx(2.0));
}

TEST_CASE("join existence polynomials take the per-class or-of-ands form") {
    Relation left = feature_relation("L", {Eigen::VectorXd::Constant(1, 0.0)});
    Relation right = feature_relation("R", {Eigen::VectorXd::Constant(1, 1.0)});
    Catalog db{{"L", &left}, {"R", &right}};
    int C = 3;
    Views views{{"L", forced_view("L", {2}, C)}, {"R", forced_view("R", {2}, C)}};
    QueryPlan plan = validate_plan(parse_query("SELECT * FROM L, R WHERE PREDICT(L) = PREDICT(R)"),
                                   db, 1, C);
    auto [rs, pm] = execute_debug(plan, db, views);
    REQUIRE(rs.rows.size() == 1);
    CHECK(rs.rows[0].key == "r:L=0,R=0");
    const auto* out = pm.find("r:L=0,R=0");
    REQUIRE(out);
    // Or over classes j of And(Atom(l,j), Atom(r,j))
    REQUIRE(out->existence->kind == Poly::Kind::Or);
    REQUIRE(out->existence->children.size() == 3);
    for (int j = 0; j < C; ++j) {
        const auto& child = out->existence->children[j];
        REQUIRE(child->kind == Poly::Kind::And);
        CHECK(child->children[0]->cls == j);
        CHECK(child->children[1]->cls == j);
    }
}

TEST_CASE("join with no co-occurring class is empty") {
    Relation left = feature_relation("L", {Eigen::VectorXd::Constant(1, 0.0)});
    Relation right = feature_relation("R", {Eigen::VectorXd::Constant(1, 1.0)});
    Catalog db{{"L", &left}, {"R", &right}};
    Views views{{"L", forced_view("L", {0}, 2)}, {"R", forced_view("R", {1}, 2)}};
    QueryPlan plan = validate_plan(parse_query("SELECT * FROM L, R WHERE PREDICT(L) = PREDICT(R)"),
                                   db, 1, 2);
    CHECK(execute(plan, db, views).rows.empty());
}

TEST_CASE("group-by over a prediction emits per-class counts and polynomials") {
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(1, 0.0),
                                          Eigen::VectorXd::Constant(1, 1.0),
                                          Eigen::VectorXd::Constant(1, 2.0)});
    Catalog db{{"R", &rel}};
    Views views{{"R", forced_view("R", {1, 1, 0}, 3)}};
    QueryPlan plan =
        validate_plan(parse_query("SELECT COUNT(*) FROM R GROUP BY PREDICT(R)"), db, 1, 3);
    auto [rs, pm] = execute_debug(plan, db, views);
    REQUIRE(rs.rows.size() == 2); // classes 0 and 1 are concretely nonempty
    CHECK(rs.rows[0].key == "g:0");
    CHECK(std::get<std::int64_t>(rs.rows[0].values[0]) == 1);
    CHECK(rs.rows[1].key == "g:1");
    CHECK(std::get<std::int64_t>(rs.rows[1].values[0]) == 2);

    // provenance covers the concretely-empty class 2 as well
    const auto* g2 = pm.find("g:2");
    REQUIRE(g2);
    CHECK(g2->aggregates.at("count").terms.size() == 3); // Atom(i, 2) for every row
    CHECK_FALSE(poly_eval(*g2->existence, class_of(views)));
}

TEST_CASE("avg over a fixed group divides by the group size") {
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(1, 0.0),
                                          Eigen::VectorXd::Constant(1, 1.0)});
    Catalog db{{"R", &rel}};
    Views views{{"R", forced_view("R", {1, 0}, 2)}};
    QueryPlan plan = validate_plan(parse_query("SELECT AVG(PREDICT(R)) FROM R"), db, 1, 2);
    ResultSet rs = execute(plan, db, views);
    REQUIRE(rs.rows.size() == 1);
    CHECK(std::get<double>(rs.rows[0].values[0]) == doctest::Approx(0.5));

    auto [rs2, pm] = execute_debug(plan, db, views);
    const AggPoly& agg = pm.find("agg")->aggregates.at("avg");
    REQUIRE(agg.denominator);
    CHECK(*agg.denominator == 2.0);
    CHECK(agg.eval(class_of(views)) == doctest::Approx(0.5));
}

TEST_CASE("avg over a prediction-dependent qualifying set is rejected in debug mode") {
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(1, 0.0)});
    Catalog db{{"R", &rel}};
    Views views{{"R", forced_view("R", {1}, 2)}};
    QueryPlan plan = validate_plan(
        parse_query("SELECT AVG(x0) FROM R WHERE PREDICT(R) = 1"), db, 1, 2);
    CHECK_THROWS_AS(execute_debug(plan, db, views), UnsupportedError);
}

TEST_CASE("ungrouped avg over an empty qualifying set yields no tuple") {
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(1, 5.0)});
    Catalog db{{"R", &rel}};
    Views views;
    QueryPlan plan = validate_plan(parse_query("SELECT AVG(x0) FROM R WHERE x0 < 0"), db, 1, 2);
    CHECK(execute(plan, db, views).rows.empty());
}

TEST_CASE("missing prediction views are reported") {
    Relation rel = feature_relation("R", {Eigen::VectorXd::Constant(1, 0.0)});
    Catalog db{{"R", &rel}};
    QueryPlan plan = validate_plan(parse_query("SELECT COUNT(*) FROM R WHERE PREDICT(R) = 1"),
                                   db, 1, 2);
    CHECK_THROWS_AS(execute(plan, db, Views{}), EvalError);
}

TEST_CASE("randomized plans: debug results match plain execution and polynomials replay it") {
    std::mt19937_64 rng(101);
    const char* queries[] = {
        "SELECT COUNT(*) FROM A WHERE PREDICT(A) = 1",
        "SELECT COUNT(*) FROM A WHERE PREDICT(A) = 1 OR x0 < 0",
        "SELECT COUNT(*) FROM A GROUP BY PREDICT(A)",
        "SELECT * FROM A, B WHERE PREDICT(A) = PREDICT(B)",
        "SELECT COUNT(*) FROM A, B WHERE PREDICT(A) = PREDICT(B) AND A.x0 <= B.x0",
        "SELECT SUM(PREDICT(A)) FROM A WHERE x0 >= 0",
        "SELECT COUNT(*) FROM A WHERE NOT PREDICT(A) != 1",
    };
    for (int trial = 0; trial < 40; ++trial) {
        int C = 2 + static_cast<int>(rng() % 3);
        auto rand_rows = [&](int n) {
            std::vector<Eigen::VectorXd> rows;
            for (int i = 0; i < n; ++i)
                rows.push_back(Eigen::VectorXd::Constant(1, gauss(rng)));
            return rows;
        };
        Relation a = feature_relation("A", rand_rows(2 + static_cast<int>(rng() % 4)));
        Relation b = feature_relation("B", rand_rows(2 + static_cast<int>(rng() % 3)));
        auto rand_classes = [&](std::size_t n) {
            std::vector<int> cls;
            for (std::size_t i = 0; i < n; ++i) cls.push_back(static_cast<int>(rng() % C));
            return cls;
        };
        Catalog db{{"A", &a}, {"B", &b}};
        Views views{{"A", forced_view("A", rand_classes(a.rows.size()), C)},
                    {"B", forced_view("B", rand_classes(b.rows.size()), C)}};

        const char* q = queries[trial % (sizeof(queries) / sizeof(queries[0]))];
        CAPTURE(trial);
        CAPTURE(q);
        QueryPlan plan = validate_plan(parse_query(q), db, 1, C);
        ResultSet direct = execute(plan, db, views);
        auto [debug_rs, pm] = execute_debug(plan, db, views);

        REQUIRE(debug_rs.rows.size() == direct.rows.size());
        for (std::size_t i = 0; i < direct.rows.size(); ++i) {
            CHECK(debug_rs.rows[i].key == direct.rows[i].key);
            CHECK(debug_rs.rows[i].values == direct.rows[i].values);
        }

        // replay the polynomials at the hard predictions
        auto cls = class_of(views);
        for (const auto& out : pm.outputs) {
            const auto* row = direct.find(out.key);
            bool exists = poly_eval(*out.existence, cls);
            CHECK(exists == (row != nullptr));
            if (!row) continue;
            for (const auto& [col, agg] : out.aggregates) {
                double replayed = agg.eval(cls);
                for (std::size_t ci = 0; ci < direct.columns.size(); ++ci)
                    if (direct.columns[ci] == col)
                        CHECK(replayed == doctest::Approx(value_as_real(row->values[ci])));
            }
        }
    }
}

TEST_CASE("positional digit threshold compiles to the factored form") {
    // two digit positions, value = 10*d2 + d1, predicate value >= 95
    AggPoly agg;
    agg.kind = AggKind::Sum;
    for (int pos = 1; pos <= 2; ++pos)
        for (int digit = 1; digit <= 9; ++digit)
            agg.terms.push_back(
                {std::pow(10.0, pos - 1) * digit, poly_atom(RowKey{"D", pos}, digit)});
    PolyPtr p = compile_threshold_predicate(agg, CmpOp::Ge, 95.0, 10);

    // x_{2,9} AND (x_{1,5} OR ... OR x_{1,9})
    REQUIRE(p->kind == Poly::Kind::And);
    REQUIRE(p->children.size() == 2);
    const auto& hi = p->children[0];
    CHECK(hi->kind == Poly::Kind::Atom);
    CHECK(hi->row.row == 2);
    CHECK(hi->cls == 9);
    const auto& lo = p->children[1];
    REQUIRE(lo->kind == Poly::Kind::Or);
    REQUIRE(lo->children.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(lo->children[i]->row.row == 1);
        CHECK(lo->children[i]->cls == 5 + i);
    }
}

TEST_CASE("thresholds outside the value range fold to constants") {
    AggPoly agg;
    agg.kind = AggKind::Count;
    for (int i = 0; i < 3; ++i) agg.terms.push_back({1.0, poly_atom(RowKey{"R", i}, 1)});
    CHECK(compile_threshold_predicate(agg, CmpOp::Ge, -1.0, 2)->kind == Poly::Kind::True);
    CHECK(compile_threshold_predicate(agg, CmpOp::Ge, 0.0, 2)->kind == Poly::Kind::True);
    CHECK(compile_threshold_predicate(agg, CmpOp::Gt, 3.0, 2)->kind == Poly::Kind::False);
    CHECK(compile_threshold_predicate(agg, CmpOp::Le, 3.0, 2)->kind == Poly::Kind::True);
}

TEST_CASE("threshold compilation agrees with direct enumeration") {
    std::mt19937_64 rng(131);
    for (int trial = 0; trial < 30; ++trial) {
        int C = 2 + static_cast<int>(rng() % 3);
        int rows = 1 + static_cast<int>(rng() % 3);
        AggPoly agg;
        agg.kind = AggKind::Sum;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < C; ++c)
                if (rng() % 2)
                    agg.terms.push_back(
                        {static_cast<double>(static_cast<int>(rng() % 7)) - 3.0,
                         poly_atom(RowKey{"R", r}, c)});
        CmpOp ops[] = {CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge};
        CmpOp op = ops[rng() % 6];
        double k = static_cast<double>(static_cast<int>(rng() % 9)) - 4.0;
        PolyPtr compiled = compile_threshold_predicate(agg, op, k, C);

        // enumerate every assignment and compare
        std::vector<int> assign(rows, 0);
        std::function<void(int)> walk = [&](int idx) {
            if (idx == rows) {
                auto cls = [&](const RowKey& key) { return assign[key.row]; };
                double value = agg.eval(cls);
                bool want = false;
                switch (op) {
                case CmpOp::Eq: want = value == k; break;
                case CmpOp::Ne: want = value != k; break;
                case CmpOp::Lt: want = value < k; break;
                case CmpOp::Le: want = value <= k; break;
                case CmpOp::Gt: want = value > k; break;
                case CmpOp::Ge: want = value >= k; break;
                }
                CHECK(poly_eval(*compiled, cls) == want);
                return;
            }
            for (int c = 0; c < C; ++c) {
                assign[idx] = c;
                walk(idx + 1);
            }
        };
        walk(0);
    }
}

TEST_CASE("threshold compilation enforces its enumeration cap") {
    AggPoly agg;
    agg.kind = AggKind::Count;
    for (int i = 0; i < 20; ++i) agg.terms.push_back({1.0, poly_atom(RowKey{"R", i}, 1)});
    CHECK_THROWS_AS(compile_threshold_predicate(agg, CmpOp::Ge, 3.0, 10, 10000), CapError);
}

TEST_CASE("polynomial json is node-tagged") {
    PolyPtr p = poly_or({poly_and({poly_atom(RowKey{"L", 1}, 2), poly_atom(RowKey{"R", 7}, 2)}),
                         poly_not(poly_atom(RowKey{"L", 1}, 0))});
    std::string js = poly_to_json(*p);
    CHECK(js.find("\"op\":\"or\"") != std::string::npos);
    CHECK(js.find("\"op\":\"and\"") != std::string::npos);
    CHECK(js.find("\"op\":\"not\"") != std::string::npos);
    CHECK(js.find("\"rel\":\"L\"") != std::string::npos);
}

TEST_CASE("one-hot contradictions fold to false inside conjunctions") {
    PolyPtr p = poly_and({poly_atom(RowKey{"R", 1}, 0), poly_atom(RowKey{"R", 1}, 2)});
    CHECK(p->kind == Poly::Kind::False);
    PolyPtr q = poly_and({poly_atom(RowKey{"R", 1}, 2), poly_atom(RowKey{"R", 1}, 2)});
    CHECK(q->kind == Poly::Kind::Atom);
}

TEST_CASE("grouped avg over predictions keyed by a plain attribute") {
    // two gender groups, binary predictions: AVG(PREDICT) is the group's positive rate
    Relation rel;
    rel.name = "R";
    rel.id_column = "id";
    rel.schema = {{"id", ColumnKind::Integer},
                  {"gender", ColumnKind::Text},
                  {"x0", ColumnKind::Real}};
    for (int i = 0; i < 4; ++i) {
        Row row;
        row.id = i;
        row.values = {static_cast<std::int64_t>(i), std::string(i < 2 ? "f" : "m"),
                      static_cast<double>(i)};
        rel.rows.push_back(std::move(row));
    }
    Catalog db{{"R", &rel}};
    Views views{{"R", forced_view("R", {1, 0, 1, 1}, 2)}};
    QueryPlan plan = validate_plan(
        parse_query("SELECT gender, AVG(PREDICT(R)) FROM R GROUP BY gender"), db, 1, 2);
    auto [rs, pm] = execute_debug(plan, db, views);
    REQUIRE(rs.rows.size() == 2);
    CHECK(rs.rows[0].key == "g:f");
    CHECK(std::get<double>(rs.rows[0].values[1]) == doctest::Approx(0.5));
    CHECK(rs.rows[1].key == "g:m");
    CHECK(std::get<double>(rs.rows[1].values[1]) == doctest::Approx(1.0));

    const auto* out = pm.find("g:f");
    REQUIRE(out);
    const AggPoly& agg = out->aggregates.at("avg");
    REQUIRE(agg.denominator);
    CHECK(*agg.denominator == 2.0);
    CHECK(agg.eval(class_of(views)) == doctest::Approx(0.5));
}

TEST_CASE("like predicates fold to constants next to prediction atoms") {
    Relation rel;
    rel.name = "R";
    rel.id_column = "id";
    rel.schema = {{"id", ColumnKind::Integer},
                  {"text", ColumnKind::Text},
                  {"x0", ColumnKind::Real}};
    const char* msgs[] = {"buy cheap deals", "meeting notes", "deal of the day"};
    for (int i = 0; i < 3; ++i) {
        Row row;
        row.id = i;
        row.values = {static_cast<std::int64_t>(i), std::string(msgs[i]),
                      static_cast<double>(i)};
        rel.rows.push_back(std::move(row));
    }
    Catalog db{{"R", &rel}};
    Views views{{"R", forced_view("R", {1, 1, 0}, 2)}};
    QueryPlan plan = validate_plan(
        parse_query("SELECT COUNT(*) FROM R WHERE PREDICT(R) = 1 AND text LIKE '%deal%'"),
        db, 1, 2);
    auto [rs, pm] = execute_debug(plan, db, views);
    CHECK(std::get<std::int64_t>(rs.rows[0].values[0]) == 1); // row 0 only
    // only the LIKE-matching rows keep symbolic atoms
    const AggPoly& agg = pm.find("agg")->aggregates.at("count");
    CHECK(agg.terms.size() == 2); // rows 0 and 2 match the pattern
    for (const auto& t : agg.terms) CHECK(t.poly->kind == Poly::Kind::Atom);
}

TEST_CASE("aggregates over an empty relation still produce their row") {
    Relation rel = feature_relation("R", {});
    rel.schema.push_back({"x0", ColumnKind::Real});
    Catalog db{{"R", &rel}};
    Views views{{"R", PredictionView{0, "R", {}}}};
    QueryPlan plan = validate_plan(parse_query("SELECT COUNT(*) FROM R WHERE PREDICT(R) = 1"),
                                   db, 1, 2);
    ResultSet rs = execute(plan, db, views);
    REQUIRE(rs.rows.size() == 1);
    CHECK(std::get<std::int64_t>(rs.rows[0].values[0]) == 0);
    auto [rs2, pm] = execute_debug(plan, db, views);
    CHECK(rs2.rows.size() == 1);
    CHECK(pm.find("agg")->aggregates.at("count").terms.empty());
}
