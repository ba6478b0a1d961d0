#include "rain/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace rain {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

ColumnKind kind_from_name(const std::string& s) {
    if (s == "integer") return ColumnKind::Integer;
    if (s == "real") return ColumnKind::Real;
    if (s == "text") return ColumnKind::Text;
    if (s == "boolean") return ColumnKind::Boolean;
    throw DataError("unknown column kind '" + s + "'");
}

} // namespace

Catalog Workspace::catalog() const {
    Catalog db;
    for (const auto& rel : relations) db[rel->name] = rel.get();
    return db;
}

QueryPlan Workspace::load_query(const std::string& name) const {
    fs::path p = root / "queries" / (name + ".sql");
    if (!fs::exists(p)) throw DataError("query not found: " + p.string());
    return parse_query(slurp(p));
}

std::vector<Complaint> Workspace::load_complaints() const {
    fs::path p = root / "complaints.json";
    if (!fs::exists(p)) throw DataError("complaints.json not found in workspace");
    return complaints_from_json(slurp(p));
}

Workspace load_workspace(const fs::path& root) {
    Workspace ws;
    ws.root = root;
    fs::path session = root / "session.json";
    if (!fs::exists(session)) throw DataError("session.json not found in " + root.string());
    nlohmann::json j = nlohmann::json::parse(slurp(session));

    SessionConfig& cfg = ws.config;
    cfg.method = method_from_name(j.value("method", "auto"));
    cfg.k_per_iteration = j.value("k", 10);
    cfg.max_removals = j.value("max_removals", 100);
    cfg.seed = j.value("seed", 0ULL);
    cfg.warm_start = j.value("warm_start", true);
    cfg.exact_or = j.value("exact_or", false);
    cfg.chooser_cap = j.value("chooser_cap", 2LL);
    if (j.contains("hyper")) {
        const auto& h = j["hyper"];
        cfg.hyper.lambda = h.value("lambda", 1e-3);
        cfg.hyper.tolerance = h.value("tolerance", 1e-8);
        cfg.hyper.max_iterations = h.value("max_iterations", 500);
        cfg.hyper.fit_intercept = h.value("fit_intercept", false);
    }
    if (j.contains("cg")) {
        const auto& c = j["cg"];
        cfg.cg.residual_tol = c.value("residual_tol", 1e-6);
        cfg.cg.max_iters = c.value("max_iters", -1);
        cfg.cg.damping = c.value("damping", 0.0);
    }
    if (j.contains("ilp")) {
        const auto& i = j["ilp"];
        cfg.ilp_limits.time_budget_s = i.value("time_budget_s", 60.0);
        cfg.ilp_limits.enum_cap = i.value("enum_cap", std::size_t{100000});
        cfg.ilp_limits.dnf_cap = i.value("dnf_cap", std::size_t{1000});
        if (i.value("strategy", "deterministic") == "uniform_random")
            cfg.ilp_strategy = SolveStrategy::UniformRandom;
    }

    if (j.contains("training")) {
        const auto& t = j["training"];
        ws.train = load_training_csv((root / t.at("file").get<std::string>()).string(),
                                     t.value("id_column", "id"), t.value("label_column", "y"),
                                     t.value("classes", 0));
    }
    for (const auto& r : j.value("relations", nlohmann::json::array())) {
        std::vector<SchemaField> schema;
        for (const auto& c : r.at("columns"))
            schema.push_back({c.at("name").get<std::string>(),
                              kind_from_name(c.at("kind").get<std::string>())});
        auto rel = std::make_shared<Relation>(load_relation_csv(
            (root / r.at("file").get<std::string>()).string(), r.at("name").get<std::string>(),
            schema, r.value("id_column", "id")));
        ws.relations.push_back(std::move(rel));
    }
    for (const auto& q : j.value("queries", nlohmann::json::array()))
        ws.query_names.push_back(q.get<std::string>());
    return ws;
}

namespace {

ModelState workspace_model(Workspace& ws) {
    fs::path cache = ws.out_dir() / "model.json";
    if (fs::exists(cache)) {
        ModelState m = model_from_json(slurp(cache));
        if (m.d == ws.train.dim && m.classes == ws.train.classes && m.converged) return m;
    }
    ModelState m = train(ws.train, ws.config.hyper, std::nullopt);
    if (!m.converged)
        throw Error("training did not converge (grad_norm " + format_double(m.grad_norm) + ")");
    spill(cache, model_to_json(m));
    return m;
}

} // namespace

int cmd_run_query(Workspace& ws, const std::string& query_name, bool dump_provenance) {
    QueryPlan plan = ws.load_query(query_name);
    Catalog db = ws.catalog();
    plan = validate_plan(plan, db, ws.train.dim, ws.train.classes);

    ModelState model = workspace_model(ws);
    Views views;
    for (const auto& term : plan.predict_terms)
        views[term.source] =
            build_prediction_view(model, *db.at(term.source), term.feature_columns);
    ResultSet rs;
    if (dump_provenance) {
        auto [debug_rs, pm] = execute_debug(plan, db, views);
        rs = std::move(debug_rs);
        spill(ws.out_dir() / (query_name + ".prov.json"), provenance_to_json(pm));
    } else {
        rs = execute(plan, db, views);
    }
    std::string csv = result_to_csv(rs);
    spill(ws.out_dir() / (query_name + ".csv"), csv);
    std::cout << csv;
    return 0;
}

int cmd_debug(Workspace& ws) {
    Catalog db = ws.catalog();
    std::vector<Complaint> complaints = ws.load_complaints();
    std::vector<NamedQuery> queries;
    for (const auto& name : ws.query_names) queries.push_back({name, ws.load_query(name)});
    if (queries.empty()) throw DataError("session.json lists no queries");
    if (complaints.empty()) throw DataError("complaints.json holds no complaints");

    DebugReport report = debug(ws.config, queries, complaints, ws.train, db);
    spill(ws.out_dir() / "report.json", report_to_json(report));
    spill(ws.out_dir() / "ranking.csv", report_ranking_csv(report));

    if (report.iterations.empty() && report.complaints_resolved) {
        std::cout << "nothing to fix: all complaints already satisfied\n";
        return 0;
    }
    for (const auto& it : report.iterations) {
        std::cout << "iteration " << it.iteration << " [" << it.method << "] removed "
                  << it.removed.size() << " records";
        if (!std::isnan(it.q_before))
            std::cout << ", q " << format_double(it.q_before) << " -> "
                      << format_double(it.q_after);
        std::cout << "\n";
    }
    std::cout << (report.complaints_resolved ? "complaints resolved" : "removal budget exhausted")
              << " after removing " << report.removed_order.size() << " records\n";
    return 0;
}

namespace {

int bench_metrics(Workspace& ws, bool gnuplot) {
    auto read_ids = [&](const fs::path& p) {
        std::vector<std::int64_t> ids;
        std::ifstream in(p);
        if (!in) throw DataError("cannot open " + p.string());
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line))
            if (!line.empty()) ids.push_back(std::stoll(line));
        return ids;
    };
    auto ranked = read_ids(ws.root / "bench" / "ranked.csv");
    auto corrupted_list = read_ids(ws.root / "bench" / "corrupted.csv");
    std::set<std::int64_t> corrupted(corrupted_list.begin(), corrupted_list.end());
    MetricSeries m = corruption_metrics(ranked, corrupted);

    std::ostringstream csv;
    csv << "k,r_k\n";
    for (std::size_t i = 0; i < m.recalls.size(); ++i)
        csv << (i + 1) << "," << format_double(m.recalls[i]) << "\n";
    spill(ws.out_dir() / "recall.csv", csv.str());
    if (gnuplot) {
        std::ostringstream dat;
        for (std::size_t i = 0; i < m.recalls.size(); ++i)
            dat << (i + 1) << " " << format_double(m.recalls[i]) << "\n";
        spill(ws.out_dir() / "recall.dat", dat.str());
    }
    spill(ws.out_dir() / "metrics.json", nlohmann::json{{"auc_cr", m.auc}}.dump(2));
    std::cout << "auc_cr " << format_double(m.auc) << "\n";
    return 0;
}

int bench_oracle(Workspace& ws, std::uint64_t seed, int seeds) {
    auto results = nlohmann::json::array();
    int agree = 0, satisfied = 0;
    for (int s = 0; s < seeds; ++s) {
        MicroInstance inst = make_micro_instance(seed + s);
        Catalog db = inst.catalog();
        Complaint c;
        c.kind = Complaint::Kind::Value;
        c.query = "q";
        c.attr = "count";
        c.desired = inst.true_count;

        SessionConfig cfg = ws.config;
        cfg.method = Method::Holistic;
        cfg.k_per_iteration = 1;
        cfg.max_removals = 6;
        cfg.hyper.fit_intercept = true;
        MinFixResult oracle = brute_force_min_fix(inst.train, db, {{"q", inst.plan}}, {c},
                                                  cfg.hyper, 2);
        DebugReport report = debug(cfg, {{"q", inst.plan}}, {c}, inst.train, db);

        bool first_in_minimal = false;
        if (!report.removed_order.empty() && oracle.found)
            for (const auto& subset : oracle.subsets)
                first_in_minimal |= subset.count(report.removed_order.front()) > 0;
        agree += first_in_minimal;
        satisfied += report.complaints_resolved;
        results.push_back({{"seed", seed + s},
                           {"oracle_minimal_size",
                            oracle.found ? static_cast<int>(oracle.subsets[0].size()) : -1},
                           {"first_removed_in_minimal", first_in_minimal},
                           {"complaints_resolved", report.complaints_resolved}});
    }
    nlohmann::json out{{"per_seed", results}, {"agreements", agree}, {"resolved", satisfied},
                       {"seeds", seeds}};
    spill(ws.out_dir() / "oracle.json", out.dump(2));
    std::cout << "oracle agreement " << agree << "/" << seeds << "\n";
    return 0;
}

int bench_decoy(Workspace& ws, std::uint64_t seed, int n, int m, int k, int draws) {
    OrthogonalDecoy inst = make_orthogonal_decoy(n, m, k, seed);
    SessionConfig cfg = ws.config;
    cfg.seed = seed;
    DecoyStats stats = run_orthogonal_decoy(inst, draws, cfg);
    nlohmann::json out{{"n", n},
                       {"m", m},
                       {"k", k},
                       {"draws", draws},
                       {"minimal_solutions", stats.minimal_solutions},
                       {"count_exact", stats.exact},
                       {"nonzero_score_frequency", stats.nonzero_freq}};
    spill(ws.out_dir() / "appendix_a.json", out.dump(2));
    std::cout << "nonzero-score frequency " << format_double(stats.nonzero_freq) << " over "
              << draws << " draws (" << stats.minimal_solutions << " minimal solutions)\n";
    return 0;
}

int bench_masked(Workspace& ws, std::uint64_t seed, int corrupted, int clean) {
    MaskedCorruption inst = make_masked_corruption(corrupted, clean, seed);
    SessionConfig cfg = ws.config;
    MaskStats stats = run_masked_corruption(inst, cfg);
    nlohmann::json out{{"corrupted", corrupted},
                       {"clean", clean},
                       {"max_loss_corrupted", stats.max_loss_corrupted},
                       {"min_self_influence_corrupted", stats.min_self_influence_corrupted},
                       {"min_complaint_score_corrupted", stats.min_score_corrupted},
                       {"max_abs_complaint_score_clean", stats.max_abs_score_clean},
                       {"auc_cr", stats.metrics.auc}};
    spill(ws.out_dir() / "appendix_c.json", out.dump(2));
    std::cout << "corrupted: max loss " << format_double(stats.max_loss_corrupted)
              << ", min self-influence " << format_double(stats.min_self_influence_corrupted)
              << "; complaint scores separate at "
              << format_double(stats.min_score_corrupted) << " vs clean |s| <= "
              << format_double(stats.max_abs_score_clean) << "\n";
    return 0;
}

int bench_ambiguity(Workspace& ws, std::uint64_t seed, bool gnuplot) {
    JoinAmbiguity inst = make_join_ambiguity(seed);
    SessionConfig cfg = ws.config;
    cfg.seed = seed;
    cfg.k_per_iteration = 10;
    cfg.max_removals = 30;
    auto points = nlohmann::json::array();
    std::ostringstream dat;
    for (double alpha : {0.1, 0.8}) {
        SweepPoint p = run_ambiguity_sweep_point(inst, alpha, cfg);
        points.push_back({{"alpha", p.alpha},
                          {"complaints", p.n_complaints},
                          {"auc_twostep", p.auc_twostep},
                          {"auc_holistic", p.auc_holistic}});
        dat << p.alpha << " " << p.auc_twostep << " " << p.auc_holistic << "\n";
        std::cout << "alpha " << alpha << ": twostep " << format_double(p.auc_twostep)
                  << ", holistic " << format_double(p.auc_holistic) << "\n";
    }
    spill(ws.out_dir() / "ambiguity_sweep.json", nlohmann::json{{"points", points}}.dump(2));
    if (gnuplot) spill(ws.out_dir() / "ambiguity_sweep.dat", dat.str());
    return 0;
}

} // namespace

int cmd_bench(Workspace& ws, const BenchOptions& o) {
    if (o.suite == "metrics") return bench_metrics(ws, o.gnuplot);
    if (o.suite == "oracle") return bench_oracle(ws, o.seed, o.seeds);
    if (o.suite == "appendix_a") return bench_decoy(ws, o.seed, o.n, o.m, o.k, o.draws);
    if (o.suite == "appendix_c") return bench_masked(ws, o.seed, o.corrupted, o.clean);
    if (o.suite == "ambiguity_sweep") return bench_ambiguity(ws, o.seed, o.gnuplot);
    std::cerr << "unknown suite '" << o.suite
              << "' (use metrics, oracle, appendix_a, appendix_c, ambiguity_sweep)\n";
    return 1;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"complaint-driven training data debugger for model-backed SQL"};
    app.require_subcommand(1);

    std::string workspace = ".";
    app.add_option("--workspace", workspace, "workspace directory")->capture_default_str();

    std::string query_name;
    bool dump_prov = false;
    auto* run_q = app.add_subcommand("run-query", "execute a named query and write its CSV");
    run_q->add_option("query", query_name, "query name under queries/")->required();
    run_q->add_flag("--prov", dump_prov, "also capture and write the provenance json");

    auto* dbg = app.add_subcommand("debug", "run the train-rank-fix loop on the filed complaints");
    std::string method;
    int k_flag = -1, max_removals = -1;
    double cg_tol = -1.0, ilp_budget = -1.0;
    bool exact_or = false;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    dbg->add_option("--method", method, "holistic|twostep|loss|infloss|auto");
    dbg->add_option("--k", k_flag, "records removed per iteration");
    dbg->add_option("--max-removals", max_removals, "total removal budget");
    dbg->add_option("--cg-tol", cg_tol, "CG residual tolerance");
    dbg->add_option("--ilp-budget", ilp_budget, "ILP time budget in seconds");
    dbg->add_flag("--exact-or", exact_or, "exact OR for mutually exclusive branches");
    dbg->add_option("--seed", seed_flag, "session seed")->each([&](const std::string&) {
        seed_set = true;
    });

    auto* bench = app.add_subcommand("bench", "run an evaluation suite");
    BenchOptions bo;
    bench->add_option("--suite", bo.suite, "metrics|oracle|appendix_a|appendix_c|ambiguity_sweep")
        ->required();
    bench->add_option("--seed", bo.seed, "base seed");
    bench->add_option("--seeds", bo.seeds, "number of seeded repetitions (oracle)");
    bench->add_option("--n", bo.n, "queried rows (appendix_a)");
    bench->add_option("--m", bo.m, "rows overlapping the noisy direction (appendix_a)");
    bench->add_option("--kk", bo.k, "complaint count target (appendix_a)");
    bench->add_option("--draws", bo.draws, "uniform-random solver draws");
    bench->add_option("--corrupted", bo.corrupted, "corrupted block size (appendix_c)");
    bench->add_option("--clean", bo.clean, "clean block size (appendix_c)");
    bench->add_flag("--gnuplot", bo.gnuplot, "emit gnuplot-compatible .dat columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        Workspace ws = load_workspace(workspace);
        if (run_q->parsed()) return cmd_run_query(ws, query_name, dump_prov);
        if (dbg->parsed()) {
            if (!method.empty()) ws.config.method = method_from_name(method);
            if (k_flag > 0) ws.config.k_per_iteration = k_flag;
            if (max_removals > 0) ws.config.max_removals = max_removals;
            if (cg_tol > 0) ws.config.cg.residual_tol = cg_tol;
            if (ilp_budget > 0) ws.config.ilp_limits.time_budget_s = ilp_budget;
            if (exact_or) ws.config.exact_or = true;
            if (seed_set) ws.config.seed = seed_flag;
            return cmd_debug(ws);
        }
        if (bench->parsed()) return cmd_bench(ws, bo);
    } catch (const IlpTimeoutError& e) {
        std::cerr << "error: ilp timeout (" << e.what()
                  << "); consider --method holistic for ambiguous complaints\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace rain
