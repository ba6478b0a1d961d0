#include "rain/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rain {

// -------------------------------------------------------------------- metrics

std::vector<double> recall_curve(const std::vector<std::int64_t>& ranked,
                                 const std::set<std::int64_t>& corrupted) {
    if (corrupted.empty()) throw DataError("recall_curve: empty corrupted set");
    std::size_t K = corrupted.size();
    std::vector<double> r(K, 0.0);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < K; ++k) {
        if (k < ranked.size() && corrupted.count(ranked[k])) ++hits;
        r[k] = static_cast<double>(hits) / static_cast<double>(K);
    }
    return r;
}

double auc_cr(const std::vector<double>& recalls) {
    if (recalls.empty()) throw DataError("auc_cr: empty recall series");
    double sum = std::accumulate(recalls.begin(), recalls.end(), 0.0);
    return 2.0 * sum / static_cast<double>(recalls.size());
}

MetricSeries corruption_metrics(const std::vector<std::int64_t>& ranked,
                                const std::set<std::int64_t>& corrupted) {
    MetricSeries m;
    m.recalls = recall_curve(ranked, corrupted);
    m.auc = auc_cr(m.recalls);
    return m;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw DataError("spearman: size mismatch");
    auto ra = average_ranks(a);
    auto rb = average_ranks(b);
    double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
    double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

// -------------------------------------------------------------------- oracles

namespace {

Hyper oracle_hyper(const Hyper& h) {
    Hyper tight = h;
    tight.tolerance = std::min(h.tolerance, 1e-10);
    tight.max_iterations = std::max(h.max_iterations, 500);
    return tight;
}

bool all_satisfied(const std::vector<NamedQuery>& queries,
                   const std::vector<Complaint>& complaints, const TrainingSet& ts,
                   const Catalog& db, const ModelState& model) {
    Views views;
    for (const auto& q : queries)
        for (const auto& term : q.plan.predict_terms)
            if (!views.count(term.source))
                views[term.source] =
                    build_prediction_view(model, *db.at(term.source), term.feature_columns);
    for (const auto& c : complaints) {
        const NamedQuery* nq = nullptr;
        for (const auto& q : queries)
            if (q.name == c.query || c.query.empty()) {
                nq = &q;
                break;
            }
        if (!nq) throw EvalError("complaint refers to unknown query '" + c.query + "'");
        ResultSet rs = execute(nq->plan, db, views);
        if (!complaint_satisfied(c, rs, views)) return false;
    }
    (void)ts;
    return true;
}

} // namespace

MinFixResult brute_force_min_fix(const TrainingSet& ts, const Catalog& db,
                                 const std::vector<NamedQuery>& queries,
                                 const std::vector<Complaint>& complaints, const Hyper& hyper,
                                 int max_subset_size, std::size_t max_retrains) {
    std::vector<NamedQuery> checked;
    for (const auto& q : queries)
        checked.push_back({q.name, q.plan.checked ? q.plan
                                                  : validate_plan(q.plan, db, ts.dim, ts.classes)});
    Hyper tight = oracle_hyper(hyper);

    MinFixResult out;
    std::vector<std::int64_t> ids;
    for (const auto& r : ts.records) ids.push_back(r.id);
    int n = static_cast<int>(ids.size());

    for (int size = 0; size <= max_subset_size; ++size) {
        std::vector<int> pick(size);
        std::iota(pick.begin(), pick.end(), 0);
        for (;;) {
            std::set<std::int64_t> subset;
            for (int p : pick) subset.insert(ids[p]);
            if (++out.retrains > max_retrains)
                throw Error("brute_force_min_fix: retrain budget exceeded");
            TrainingSet reduced = ts.without(subset);
            ModelState model = train(reduced, tight, std::nullopt);
            if (model.converged && all_satisfied(checked, complaints, reduced, db, model))
                out.subsets.push_back(subset);
            // next combination
            int i = size - 1;
            while (i >= 0 && pick[i] == n - size + i) --i;
            if (i < 0) break;
            ++pick[i];
            for (int j = i + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
        }
        if (!out.subsets.empty()) {
            out.found = true;
            return out;
        }
    }
    return out;
}

std::vector<double> loo_retrain_delta_q(const TrainingSet& ts, const QFunction& q,
                                        const Hyper& hyper) {
    Hyper tight = oracle_hyper(hyper);
    ModelState base = train(ts, tight, std::nullopt);
    if (!base.converged) throw Error("loo oracle: base training did not converge");
    double q0 = q.value(base);
    std::vector<double> out(ts.size(), 0.0);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        ModelState m = train(ts.without({ts.records[i].id}), tight, std::nullopt);
        if (!m.converged)
            throw Error("loo oracle: retraining without record " +
                        std::to_string(ts.records[i].id) + " did not converge");
        out[i] = q.value(m) - q0;
    }
    return out;
}

// ------------------------------------------------------------- shared helpers

namespace {

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double gauss(std::mt19937_64& rng) {
    // Box-Muller; avoids distribution implementations that vary by library
    double u1 = std::max(unit_uniform(rng), 1e-300);
    double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::shared_ptr<Relation> make_feature_relation(
    const std::string& name, const std::vector<std::pair<std::int64_t, Eigen::VectorXd>>& rows) {
    auto rel = std::make_shared<Relation>();
    rel->name = name;
    rel->id_column = "id";
    rel->schema.push_back({"id", ColumnKind::Integer});
    int d = rows.empty() ? 0 : static_cast<int>(rows[0].second.size());
    for (int i = 0; i < d; ++i) rel->schema.push_back({"x" + std::to_string(i), ColumnKind::Real});
    for (const auto& [id, x] : rows) {
        Row row;
        row.id = id;
        row.values.push_back(id);
        for (int i = 0; i < d; ++i) row.values.push_back(x[i]);
        rel->rows.push_back(std::move(row));
    }
    return rel;
}

} // namespace

// -------------------------------------------- analytic limiting constructions

Catalog OrthogonalDecoy::catalog() const { return {{queried->name, queried.get()}}; }
Catalog MaskedCorruption::catalog() const { return {{queried->name, queried.get()}}; }
Catalog PlantedBlobs::catalog() const { return {{queried->name, queried.get()}}; }
Catalog MicroInstance::catalog() const { return {{queried->name, queried.get()}}; }
Catalog JoinAmbiguity::catalog() const {
    return {{left->name, left.get()}, {right->name, right.get()}};
}

OrthogonalDecoy make_orthogonal_decoy(int n, int m, int k, std::uint64_t seed) {
    if (n <= m || m < 0 || k < 1 || k > n) throw DataError("make_orthogonal_decoy: need n > m >= 0, 1 <= k <= n");
    std::mt19937_64 rng(seed);
    const int clean_axes = 3;
    const int dim = 1 + clean_axes; // axis 0 is the noisy direction

    OrthogonalDecoy inst;
    inst.n = n; inst.m = m; inst.k = k;
    inst.train.dim = dim;
    inst.train.classes = 2;

    std::int64_t next_id = 0;
    // the noisy record: label 1 on the reserved axis
    TrainingRecord noisy;
    noisy.id = inst.noisy_id = next_id++;
    noisy.features = Eigen::VectorXd::Zero(dim);
    noisy.features[0] = 1.0;
    noisy.label = 1;
    inst.train.records.push_back(noisy);
    // clean block: +- unit points on each remaining axis, labels by sign
    for (int a = 1; a < dim; ++a) {
        for (int s = 0; s < 2; ++s) {
            TrainingRecord r;
            r.id = next_id++;
            r.features = Eigen::VectorXd::Zero(dim);
            double scale = 1.0 + 0.2 * unit_uniform(rng);
            r.features[a] = s == 0 ? scale : -scale;
            r.label = s == 0 ? 1 : 0;
            inst.train.records.push_back(r);
        }
    }

    // queried rows, all predicted 1 (= the noisy label): m on the noisy axis,
    // n - m at clean label-1 positions
    std::vector<std::pair<std::int64_t, Eigen::VectorXd>> qrows;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        if (i < m) {
            x[0] = 1.0 + 0.1 * unit_uniform(rng);
        } else {
            x[1 + (i - m) % clean_axes] = 1.0;
        }
        qrows.push_back({i, x});
    }
    inst.queried = make_feature_relation("q", qrows);
    inst.plan = parse_query("SELECT COUNT(*) FROM q WHERE PREDICT(q) = 0");
    inst.complaint.kind = Complaint::Kind::Value;
    inst.complaint.query = "q";
    inst.complaint.attr = "count";
    inst.complaint.op = CmpOp::Eq;
    inst.complaint.desired = static_cast<double>(k);
    return inst;
}

DecoyStats run_orthogonal_decoy(const OrthogonalDecoy& inst, int draws, const SessionConfig& cfg) {
    Catalog db = inst.catalog();
    Hyper hyper = cfg.hyper;
    hyper.fit_intercept = false; // keeps the coordinate blocks exactly decoupled

    ModelState model = train(inst.train, hyper, std::nullopt);
    if (!model.converged) throw Error("decoy: training did not converge");
    QueryPlan plan = validate_plan(inst.plan, db, inst.train.dim, inst.train.classes);
    Views views;
    views["q"] = build_prediction_view(model, *inst.queried, plan.predict_terms[0].feature_columns);
    auto [rs, pm] = execute_debug(plan, db, views);
    std::vector<QueryDebugContext> ctxs{{"q", &pm, &rs}};
    auto features = std::make_shared<const FeatureSource>(FeatureSource::build(db));

    IlpInstance ilp = build_ilp({inst.complaint}, ctxs, views, inst.train.classes, cfg.ilp_limits);
    AmbiguityCount amb = ambiguity_count(ilp, 1 << 20, cfg.ilp_limits);

    DecoyStats stats;
    stats.minimal_solutions = amb.count;
    stats.exact = amb.exact;
    stats.draws = draws;
    std::map<std::vector<int>, bool> cache;
    int nonzero = 0;
    for (int d = 0; d < draws; ++d) {
        IlpAssignment a = solve_ilp(ilp, SolveStrategy::UniformRandom,
                                    cfg.seed + static_cast<std::uint64_t>(d), cfg.ilp_limits);
        auto it = cache.find(a.assigned);
        if (it == cache.end()) {
            QFunction q = encode_mispredictions(a, ilp, model, features, cfg.twostep_mode);
            InfluenceScores s = score_training_records(model, inst.train, q, cfg.cg);
            it = cache.emplace(a.assigned, std::abs(s.by_id(inst.noisy_id)) > 1e-9).first;
        }
        if (it->second) ++nonzero;
    }
    stats.nonzero_freq = static_cast<double>(nonzero) / static_cast<double>(draws);
    return stats;
}

MaskedCorruption make_masked_corruption(int corrupted_count, int clean_count, std::uint64_t seed) {
    if (corrupted_count < 1 || clean_count < 2)
        throw DataError("make_masked_corruption: bad sizes");
    std::mt19937_64 rng(seed);
    const int clean_axes = 4;
    const int dim = 1 + clean_axes;
    const double kappa = 10.0; // feature scale of the corrupted direction

    MaskedCorruption inst;
    inst.train.dim = dim;
    inst.train.classes = 2;
    std::int64_t next_id = 0;
    for (int i = 0; i < corrupted_count; ++i) {
        TrainingRecord r;
        r.id = next_id++;
        r.features = Eigen::VectorXd::Zero(dim);
        r.features[0] = kappa; // pairwise parallel, separable (all one class)
        r.label = 1;           // inverted: truly class 0
        inst.corrupted_ids.insert(r.id);
        inst.train.records.push_back(r);
    }
    for (int i = 0; i < clean_count; ++i) {
        TrainingRecord r;
        r.id = next_id++;
        r.features = Eigen::VectorXd::Zero(dim);
        int axis = 1 + i % clean_axes;
        bool pos = (i / clean_axes) % 2 == 0;
        r.features[axis] = (pos ? 1.0 : -1.0) * (1.0 + 0.2 * unit_uniform(rng));
        r.label = pos ? 1 : 0;
        inst.train.records.push_back(r);
    }

    std::vector<std::pair<std::int64_t, Eigen::VectorXd>> qrows;
    Eigen::VectorXd xq = Eigen::VectorXd::Zero(dim);
    xq[0] = kappa; // parallel to the corrupted block, truly class 0
    qrows.push_back({0, xq});
    for (int i = 1; i <= 2; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        x[i] = 1.0;
        qrows.push_back({i, x});
    }
    inst.queried = make_feature_relation("q", qrows);
    inst.complaint.kind = Complaint::Kind::Prediction;
    inst.complaint.query = "q";
    inst.complaint.target.row_id = 0;
    inst.complaint.target.rel = "q";
    inst.complaint.desired = 0.0; // correct class of the mispredicted row
    return inst;
}

MaskStats run_masked_corruption(const MaskedCorruption& inst, const SessionConfig& cfg) {
    Catalog db = inst.catalog();
    Hyper hyper = cfg.hyper;
    hyper.fit_intercept = false;

    ModelState model = train(inst.train, hyper, std::nullopt);
    if (!model.converged) throw Error("masked corruption: training did not converge");
    Views views;
    views["q"] = build_prediction_view(model, *inst.queried, inst.queried->feature_columns());
    auto features = std::make_shared<const FeatureSource>(FeatureSource::build(db));

    QFunction q = encode_complaints({inst.complaint}, {}, views, features);
    InfluenceScores complaint_scores = score_training_records(model, inst.train, q, cfg.cg);
    InfluenceScores self_scores = self_influence_scores(model, inst.train, cfg.cg);
    InfluenceScores losses = loss_scores(model, inst.train);

    MaskStats stats;
    stats.max_loss_corrupted = -std::numeric_limits<double>::infinity();
    stats.min_self_influence_corrupted = std::numeric_limits<double>::infinity();
    stats.min_score_corrupted = std::numeric_limits<double>::infinity();
    stats.max_abs_score_clean = 0.0;
    for (std::size_t i = 0; i < inst.train.size(); ++i) {
        std::int64_t id = inst.train.records[i].id;
        if (inst.corrupted_ids.count(id)) {
            stats.max_loss_corrupted = std::max(stats.max_loss_corrupted, losses.scores[i]);
            stats.min_self_influence_corrupted =
                std::min(stats.min_self_influence_corrupted, self_scores.scores[i]);
            stats.min_score_corrupted =
                std::min(stats.min_score_corrupted, complaint_scores.scores[i]);
        } else {
            stats.max_abs_score_clean =
                std::max(stats.max_abs_score_clean, std::abs(complaint_scores.scores[i]));
        }
    }
    // ranking by complaint-based influence, descending
    std::vector<std::size_t> order(inst.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (complaint_scores.scores[a] != complaint_scores.scores[b])
            return complaint_scores.scores[a] > complaint_scores.scores[b];
        return complaint_scores.record_ids[a] < complaint_scores.record_ids[b];
    });
    std::vector<std::int64_t> ranked;
    for (auto i : order) ranked.push_back(complaint_scores.record_ids[i]);
    stats.metrics = corruption_metrics(ranked, inst.corrupted_ids);
    return stats;
}

// ----------------------------------------------------- synthetic experiments

PlantedBlobs make_planted_blobs(int n_train, int n_query, int dim, double flip_rate,
                                std::uint64_t seed) {
    if (dim < 2) throw DataError("make_planted_blobs: dim must be >= 2");
    std::mt19937_64 rng(seed);

    PlantedBlobs inst;
    inst.train.dim = dim;
    inst.train.classes = 2;
    auto sample = [&](int label) {
        Eigen::VectorXd x(dim);
        for (int i = 0; i < dim; ++i) x[i] = 0.9 * gauss(rng);
        x[0] += label == 1 ? 1.2 : -1.2;
        return x;
    };
    for (int i = 0; i < n_train; ++i) {
        TrainingRecord r;
        r.id = i;
        r.label = unit_uniform(rng) < 0.5 ? 1 : 0;
        r.features = sample(r.label);
        inst.train.records.push_back(std::move(r));
    }

    // systematic corruption: flip class-1 labels inside the x1 > 0.6 subspace
    CorruptionSpec spec;
    spec.label_equals = 1;
    spec.ranges.push_back({1, 0.6, std::numeric_limits<double>::infinity()});
    spec.flip_to = 0;
    spec.rate = flip_rate;
    spec.seed = seed ^ 0x9e3779b97f4a7c15ULL;
    auto [corrupted, ids] = inject_corruption(inst.train, spec);
    inst.train = std::move(corrupted);
    inst.corrupted_ids = std::move(ids);

    std::vector<std::pair<std::int64_t, Eigen::VectorXd>> qrows;
    int true_positive = 0;
    for (int i = 0; i < n_query; ++i) {
        int label = unit_uniform(rng) < 0.5 ? 1 : 0;
        true_positive += label;
        qrows.push_back({i, sample(label)});
    }
    inst.queried = make_feature_relation("q", qrows);
    inst.plan = parse_query("SELECT COUNT(*) FROM q WHERE PREDICT(q) = 1");
    inst.true_count = static_cast<double>(true_positive);
    return inst;
}

MethodRun run_corruption_experiment(Method method, const PlantedBlobs& inst,
                                    double complaint_value, SessionConfig cfg) {
    cfg.method = method;
    cfg.hyper.fit_intercept = true;

    Complaint c;
    c.kind = Complaint::Kind::Value;
    c.query = "q";
    c.attr = "count";
    c.op = CmpOp::Eq;
    c.desired = complaint_value;

    MethodRun run;
    run.report = debug(cfg, {{"q", inst.plan}}, {c}, inst.train, inst.catalog());
    run.ranked = run.report.removed_order;
    run.resolved = run.report.complaints_resolved;
    run.metrics = corruption_metrics(run.ranked, inst.corrupted_ids);
    return run;
}

MicroInstance make_micro_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // rejection-sample the jitter until the planted flip concretely breaks
    // the count, so the complaint is violated at entry
    for (int attempt = 0; attempt < 50; ++attempt) {
        MicroInstance inst;
        inst.train.dim = 2;
        inst.train.classes = 2;

        std::int64_t next_id = 0;
        auto add = [&](double cx, int label) {
            TrainingRecord r;
            r.id = next_id++;
            r.features = Eigen::VectorXd(2);
            r.features[0] = cx + 0.25 * gauss(rng);
            r.features[1] = 0.5 * gauss(rng);
            r.label = label;
            inst.train.records.push_back(std::move(r));
        };
        for (int i = 0; i < 6; ++i) add(-1.4, 0);
        for (int i = 0; i < 5; ++i) add(1.4, 1);
        // the planted corruption: a truly-positive record labeled 0, placed
        // where it drags the boundary across the positive queried rows
        TrainingRecord bad;
        bad.id = inst.planted_id = next_id++;
        bad.features = Eigen::VectorXd(2);
        bad.features[0] = 0.7;
        bad.features[1] = 0.0;
        bad.label = 0;
        inst.train.records.push_back(bad);

        std::vector<std::pair<std::int64_t, Eigen::VectorXd>> qrows;
        std::int64_t qid = 0;
        auto addq = [&](double cx) {
            Eigen::VectorXd x(2);
            x[0] = cx;
            x[1] = 0.3 * gauss(rng);
            qrows.push_back({qid++, x});
        };
        for (int i = 0; i < 4; ++i) addq(-1.4 + 0.2 * gauss(rng));
        for (int i = 0; i < 4; ++i) addq(0.55 + 0.1 * gauss(rng));
        inst.queried = make_feature_relation("q", qrows);
        inst.plan = parse_query("SELECT COUNT(*) FROM q WHERE PREDICT(q) = 1");
        inst.true_count = 4.0;

        Hyper hyper;
        hyper.fit_intercept = true;
        ModelState model = train(inst.train, hyper, std::nullopt);
        if (!model.converged) continue;
        Catalog db = inst.catalog();
        QueryPlan plan = validate_plan(inst.plan, db, 2, 2);
        Views views{{"q", build_prediction_view(model, *inst.queried,
                                                plan.predict_terms[0].feature_columns)}};
        double count = value_as_real(execute(plan, db, views).rows[0].values[0]);
        if (count < inst.true_count) return inst;
    }
    throw Error("make_micro_instance: no violating instance after 50 attempts");
}

JoinAmbiguity make_join_ambiguity(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int classes = 4;
    const int dim = 4;
    const int per_class = 100;

    JoinAmbiguity inst;
    inst.train.dim = dim;
    inst.train.classes = classes;
    auto sample = [&](int cls) {
        Eigen::VectorXd x(dim);
        for (int i = 0; i < dim; ++i) x[i] = 0.55 * gauss(rng);
        x[cls] += 2.2;
        return x;
    };
    std::int64_t next_id = 0;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            TrainingRecord r;
            r.id = next_id++;
            r.label = c;
            r.features = sample(c);
            inst.train.records.push_back(std::move(r));
        }
    CorruptionSpec spec;
    spec.label_equals = 1;
    spec.flip_to = 3;
    spec.rate = 0.5;
    spec.seed = seed ^ 0xda3e39cb94b95bdbULL;
    auto [corrupted, ids] = inject_corruption(inst.train, spec);
    inst.train = std::move(corrupted);
    inst.corrupted_ids = std::move(ids);

    // a wide left side holding the class whose labels were flipped, and a
    // narrow right side: the spurious join tuples are many-left-to-few-right,
    // so a tuple complaint alone leaves the fix highly ambiguous
    std::vector<std::pair<std::int64_t, Eigen::VectorXd>> lrows, rrows;
    for (int i = 0; i < 120; ++i) {
        int cls = i % 2; // classes 0 and 1
        inst.left_truth[i] = cls;
        lrows.push_back({i, sample(cls)});
    }
    for (int i = 0; i < 8; ++i) {
        int cls = i < 6 ? 2 : 3;
        inst.right_truth[i] = cls;
        rrows.push_back({i, sample(cls)});
    }
    inst.left = make_feature_relation("L", lrows);
    inst.right = make_feature_relation("R", rrows);
    inst.plan = parse_query("SELECT * FROM L, R WHERE PREDICT(L) = PREDICT(R)");
    return inst;
}

std::vector<Complaint> ambiguity_complaints(const JoinAmbiguity& inst, const ResultSet& joined,
                                            double alpha, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Complaint> out;
    std::set<std::pair<std::int64_t, std::int64_t>> pinned;
    for (const auto& row : joined.rows) {
        // key is "r:L=<i>,R=<j>"
        std::int64_t l = 0, r = 0;
        std::sscanf(row.key.c_str(), "r:L=%ld,R=%ld", &l, &r);
        if (unit_uniform(rng) < alpha) {
            for (bool left_side : {true, false}) {
                std::int64_t id = left_side ? l : r;
                auto key = std::make_pair(left_side ? 0L : 1L, id);
                if (pinned.count({key.first, key.second})) continue;
                pinned.insert({key.first, key.second});
                Complaint c;
                c.kind = Complaint::Kind::Prediction;
                c.query = "q";
                c.target.rel = left_side ? "L" : "R";
                c.target.row_id = id;
                c.desired = left_side ? inst.left_truth.at(id) : inst.right_truth.at(id);
                out.push_back(std::move(c));
            }
        } else {
            Complaint c;
            c.kind = Complaint::Kind::Tuple;
            c.query = "q";
            c.target.tuple_key = "L=" + std::to_string(l) + ",R=" + std::to_string(r);
            out.push_back(std::move(c));
        }
    }
    return out;
}

SweepPoint run_ambiguity_sweep_point(const JoinAmbiguity& inst, double alpha, SessionConfig cfg) {
    Catalog db = inst.catalog();
    cfg.hyper.fit_intercept = true;

    // complaints come from the initially observed spurious join tuples
    ModelState model = train(inst.train, cfg.hyper, std::nullopt);
    if (!model.converged) throw Error("join ambiguity: training did not converge");
    QueryPlan plan = validate_plan(inst.plan, db, inst.train.dim, inst.train.classes);
    Views views;
    for (const auto& term : plan.predict_terms)
        views[term.source] =
            build_prediction_view(model, *db.at(term.source), term.feature_columns);
    ResultSet joined = execute(plan, db, views);
    std::vector<Complaint> complaints =
        ambiguity_complaints(inst, joined, alpha, cfg.seed ^ 0xabcdef12345ULL);

    SweepPoint point;
    point.alpha = alpha;
    point.n_complaints = static_cast<int>(complaints.size());
    for (Method method : {Method::TwoStep, Method::Holistic}) {
        SessionConfig mc = cfg;
        mc.method = method;
        DebugReport report = debug(mc, {{"q", inst.plan}}, complaints, inst.train, db);
        double auc = corruption_metrics(report.removed_order, inst.corrupted_ids).auc;
        if (method == Method::TwoStep) point.auc_twostep = auc;
        else point.auc_holistic = auc;
    }
    return point;
}

} // namespace rain
