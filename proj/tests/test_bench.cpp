#include "rain/bench.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace rain;
using namespace rain::testing;

TEST_CASE("recall curve counts hits in the top-k") {
    std::set<std::int64_t> corrupted{1, 2};
    CHECK(recall_curve({5, 1, 2}, corrupted) == std::vector<double>{0.0, 0.5});
    CHECK(recall_curve({2, 1}, corrupted) == std::vector<double>{0.5, 1.0});
    CHECK(recall_curve({7, 8, 9}, corrupted) == std::vector<double>{0.0, 0.0});
    CHECK(recall_curve({}, corrupted) == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(recall_curve({1}, {}), DataError);
}

TEST_CASE("recall is monotone nondecreasing") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::set<std::int64_t> corrupted;
        while (corrupted.size() < 5) corrupted.insert(static_cast<std::int64_t>(rng() % 30));
        std::vector<std::int64_t> ranked;
        for (int i = 0; i < 30; ++i) ranked.push_back(i);
        for (std::size_t i = ranked.size(); i-- > 1;)
            std::swap(ranked[i], ranked[rng() % (i + 1)]);
        auto r = recall_curve(ranked, corrupted);
        for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] >= r[k - 1]);
        CHECK(r.back() <= 1.0);
    }
}

TEST_CASE("auc_cr follows the printed formula, exceeding one at small K") {
    CHECK(auc_cr({0.0, 0.0, 0.0}) == 0.0);
    CHECK(auc_cr({0.25, 0.5, 0.75, 1.0}) == doctest::Approx(1.25));
    CHECK(auc_cr({0.0, 0.25, 0.5, 0.5}) == doctest::Approx(0.625));
}

TEST_CASE("auc strictly improves when a correct id moves up past an incorrect one") {
    std::set<std::int64_t> corrupted{4, 5};
    double before = corruption_metrics({9, 4, 5, 1}, corrupted).auc;
    double after = corruption_metrics({4, 9, 5, 1}, corrupted).auc;
    CHECK(after > before);
}

TEST_CASE("spearman handles monotone and reversed sequences") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
    CHECK(std::abs(spearman({1, 2, 3, 4}, {1, 1, 1, 1})) <= 1e-12);
    CHECK(spearman({1.0, 1.0, 2.0}, {3.0, 3.0, 4.0}) == doctest::Approx(1.0));
}

TEST_CASE("brute force returns the empty set when nothing is violated") {
    MicroInstance inst = make_micro_instance(1);
    Catalog db = inst.catalog();
    Hyper hyper;
    hyper.fit_intercept = true;

    // complain about whatever the corrupted model already produces
    ModelState model = train(inst.train, hyper, std::nullopt);
    QueryPlan plan = validate_plan(inst.plan, db, 2, 2);
    Views views{
        {"q", build_prediction_view(model, *db.at("q"), plan.predict_terms[0].feature_columns)}};
    double current = value_as_real(execute(plan, db, views).rows[0].values[0]);

    Complaint c;
    c.kind = Complaint::Kind::Value;
    c.query = "q";
    c.attr = "count";
    c.desired = current;
    MinFixResult res = brute_force_min_fix(inst.train, db, {{"q", inst.plan}}, {c}, hyper, 2);
    REQUIRE(res.found);
    REQUIRE(res.subsets.size() >= 1);
    CHECK(res.subsets[0].empty());
}

TEST_CASE("brute force finds the planted record on the micro instance") {
    MicroInstance inst = make_micro_instance(2);
    Catalog db = inst.catalog();
    Hyper hyper;
    hyper.fit_intercept = true;
    Complaint c;
    c.kind = Complaint::Kind::Value;
    c.query = "q";
    c.attr = "count";
    c.desired = inst.true_count;
    MinFixResult res = brute_force_min_fix(inst.train, db, {{"q", inst.plan}}, {c}, hyper, 2);
    REQUIRE(res.found);
    bool planted_in_some = false;
    for (const auto& subset : res.subsets) planted_in_some |= subset.count(inst.planted_id) > 0;
    CHECK(planted_in_some);
}

TEST_CASE("brute force reports infeasibility within its cap") {
    MicroInstance inst = make_micro_instance(3);
    Catalog db = inst.catalog();
    Hyper hyper;
    hyper.fit_intercept = true;
    Complaint c;
    c.kind = Complaint::Kind::Value;
    c.query = "q";
    c.attr = "count";
    c.desired = 1000.0; // unreachable count
    MinFixResult res = brute_force_min_fix(inst.train, db, {{"q", inst.plan}}, {c}, hyper, 1);
    CHECK_FALSE(res.found);
    CHECK(res.subsets.empty());
}

TEST_CASE("loo deltas are zero for constant q and equal for duplicates") {
    std::mt19937_64 rng(5);
    TrainingSet ts = random_training_set(12, 2, 2, rng);
    ts.records.push_back(ts.records[0]);
    ts.records.back().id = 100;

    QFunction constant;
    constant.value = [](const ModelState&) { return 3.14; };
    constant.grad = [](const ModelState& m) { return Eigen::VectorXd::Zero(m.param_dim()); };
    auto deltas = loo_retrain_delta_q(ts, constant, Hyper{});
    for (double d : deltas) CHECK(d == 0.0);

    QFunction norm;
    norm.value = [](const ModelState& m) { return m.theta.squaredNorm(); };
    norm.grad = [](const ModelState& m) { return Eigen::VectorXd(2.0 * m.theta); };
    deltas = loo_retrain_delta_q(ts, norm, Hyper{});
    CHECK(deltas[0] == doctest::Approx(deltas.back()).epsilon(1e-6));
}

TEST_CASE("orthogonal decoy instance has the binomial solution count") {
    OrthogonalDecoy inst = make_orthogonal_decoy(6, 1, 2, 9);
    SessionConfig cfg;
    DecoyStats stats = run_orthogonal_decoy(inst, 50, cfg);
    CHECK(stats.exact);
    CHECK(stats.minimal_solutions == 15); // C(6,2)
    CHECK(stats.nonzero_freq > 0.0);
    CHECK(stats.nonzero_freq < 1.0);
}

TEST_CASE("orthogonal decoy with m = 0 never scores the noisy record") {
    OrthogonalDecoy inst = make_orthogonal_decoy(6, 0, 1, 11);
    SessionConfig cfg;
    DecoyStats stats = run_orthogonal_decoy(inst, 100, cfg);
    CHECK(stats.minimal_solutions == 6);
    CHECK(stats.nonzero_freq == 0.0);
}

TEST_CASE("masked corruption drives loss-based signals to zero but not complaint scores") {
    MaskedCorruption inst = make_masked_corruption(100, 40, 13);
    SessionConfig cfg;
    MaskStats stats = run_masked_corruption(inst, cfg);
    CHECK(stats.max_loss_corrupted <= 1e-2);
    CHECK(stats.min_self_influence_corrupted >= -1e-2);
    CHECK(stats.min_score_corrupted > 0.0);
    CHECK(stats.max_abs_score_clean <= 1e-8);
    CHECK(stats.metrics.auc >= 1.0); // corrupted records rank strictly first
}

TEST_CASE("planted blobs flip only class-1 records inside the subspace") {
    PlantedBlobs inst = make_planted_blobs(300, 50, 3, 0.5, 15);
    CHECK(!inst.corrupted_ids.empty());
    for (const auto& r : inst.train.records) {
        if (!inst.corrupted_ids.count(r.id)) continue;
        CHECK(r.label == 0);          // flipped to 0
        CHECK(r.features[1] > 0.6);   // inside the predicate subspace
    }
    CHECK(inst.queried->rows.size() == 50);
    CHECK(inst.true_count >= 0.0);
}

TEST_CASE("join ambiguity complaints swap tuple complaints for prediction pins") {
    JoinAmbiguity inst = make_join_ambiguity(21);
    Catalog db = inst.catalog();
    Hyper hyper;
    hyper.fit_intercept = true;
    ModelState model = train(inst.train, hyper, std::nullopt);
    QueryPlan plan = validate_plan(inst.plan, db, 4, 4);
    Views views;
    for (const auto& term : plan.predict_terms)
        views[term.source] =
            build_prediction_view(model, *db.at(term.source), term.feature_columns);
    ResultSet joined = execute(plan, db, views);
    REQUIRE(!joined.rows.empty()); // the corruption creates spurious join tuples

    auto low = ambiguity_complaints(inst, joined, 0.0, 77);
    CHECK(low.size() == joined.rows.size());
    for (const auto& c : low) CHECK(c.kind == Complaint::Kind::Tuple);

    auto high = ambiguity_complaints(inst, joined, 1.0, 77);
    for (const auto& c : high) CHECK(c.kind == Complaint::Kind::Prediction);
}
