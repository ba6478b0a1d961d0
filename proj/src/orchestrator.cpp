#include "rain/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

namespace rain {

std::string method_name(Method m) {
    switch (m) {
    case Method::Holistic: return "holistic";
    case Method::TwoStep: return "twostep";
    case Method::Loss: return "loss";
    case Method::InfLoss: return "infloss";
    case Method::Auto: return "auto";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "holistic") return Method::Holistic;
    if (name == "twostep") return Method::TwoStep;
    if (name == "loss") return Method::Loss;
    if (name == "infloss") return Method::InfLoss;
    if (name == "auto") return Method::Auto;
    throw DataError("unknown method '" + name + "'");
}

Method choose_method(const std::vector<Complaint>& cs,
                     const std::vector<QueryDebugContext>& queries, const Views& views,
                     int classes, long long cap, const IlpLimits& limits) {
    try {
        IlpInstance ilp = build_ilp(cs, queries, views, classes, limits);
        AmbiguityCount amb = ambiguity_count(ilp, cap, limits);
        if (amb.exact && amb.count == 1) return Method::TwoStep;
    } catch (const Error&) {
        // unsupported shape, infeasible, cap or timeout: fall through
    }
    return Method::Holistic;
}

std::vector<std::int64_t> rank_and_remove(TrainingSet& working, const InfluenceScores& scores,
                                          int k) {
    if (k > static_cast<int>(working.size()))
        throw EvalError("rank_and_remove: k exceeds remaining training-set size");
    std::vector<std::size_t> order(scores.record_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
        return scores.record_ids[a] < scores.record_ids[b];
    });
    std::vector<std::int64_t> removed;
    std::set<std::int64_t> removed_set;
    for (int i = 0; i < k; ++i) {
        removed.push_back(scores.record_ids[order[i]]);
        removed_set.insert(scores.record_ids[order[i]]);
    }
    working = working.without(removed_set);
    return removed;
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

} // namespace

DebugReport debug(const SessionConfig& cfg, const std::vector<NamedQuery>& queries,
                  const std::vector<Complaint>& complaints, const TrainingSet& ts,
                  const Catalog& db) {
    if (cfg.k_per_iteration < 1) throw DataError("k_per_iteration must be >= 1");

    std::vector<NamedQuery> checked;
    for (const auto& q : queries) {
        NamedQuery nq{q.name, q.plan.checked ? q.plan
                                             : validate_plan(q.plan, db, ts.dim, ts.classes)};
        checked.push_back(std::move(nq));
    }
    auto features = std::make_shared<const FeatureSource>(FeatureSource::build(db));

    DebugReport report;
    TrainingSet working = ts;
    Timer t_train;
    ModelState model = train(working, cfg.hyper, std::nullopt);
    double pending_train_s = t_train.elapsed();
    if (!model.converged)
        throw Error("training did not converge (grad_norm " + format_double(model.grad_norm) + ")");

    int iteration = 0;
    for (;;) {
        // fresh views and concrete results for this iteration's model
        Views views;
        for (const auto& q : checked)
            for (const auto& term : q.plan.predict_terms)
                if (!views.count(term.source))
                    views[term.source] = build_prediction_view(
                        model, *db.at(term.source), term.feature_columns, model.version);

        std::vector<ResultSet> results;
        std::vector<ProvenanceMap> provs;
        std::vector<QueryDebugContext> ctxs;
        results.reserve(checked.size());
        for (const auto& q : checked) results.push_back(execute(q.plan, db, views));

        std::vector<bool> satisfied;
        bool all_satisfied = true;
        for (const auto& c : complaints) {
            const ResultSet* rs = nullptr;
            for (std::size_t i = 0; i < checked.size(); ++i)
                if (checked[i].name == c.query || c.query.empty()) {
                    rs = &results[i];
                    break;
                }
            if (!rs) throw EvalError("complaint refers to unknown query '" + c.query + "'");
            bool ok = complaint_satisfied(c, *rs, views);
            satisfied.push_back(ok);
            all_satisfied &= ok;
        }

        if (all_satisfied || static_cast<int>(report.removed_order.size()) >= cfg.max_removals ||
            working.size() == 0) {
            report.complaints_resolved = all_satisfied;
            report.final_satisfied = satisfied;
            report.final_model = model;
            return report;
        }

        Timer t_encode;
        provs.reserve(checked.size());
        for (std::size_t i = 0; i < checked.size(); ++i) {
            auto [rs, pm] = execute_debug(checked[i].plan, db, views);
            provs.push_back(std::move(pm));
            ctxs.push_back({checked[i].name, &provs.back(), &results[i]});
        }

        Method method = cfg.method;
        if (method == Method::Auto)
            method = choose_method(complaints, ctxs, views, ts.classes, cfg.chooser_cap,
                                   cfg.ilp_limits);

        QFunction q;
        bool has_q = method == Method::Holistic || method == Method::TwoStep;
        if (method == Method::Holistic) {
            q = encode_complaints(complaints, ctxs, views, features,
                                  RelaxOptions{cfg.exact_or});
        } else if (method == Method::TwoStep) {
            IlpInstance ilp = build_ilp(complaints, ctxs, views, ts.classes, cfg.ilp_limits);
            IlpAssignment a =
                solve_ilp(ilp, cfg.ilp_strategy, cfg.seed + iteration, cfg.ilp_limits);
            q = encode_mispredictions(a, ilp, model, features, cfg.twostep_mode);
        }
        double encode_s = t_encode.elapsed();

        Timer t_rank;
        InfluenceScores scores;
        if (method == Method::Holistic || method == Method::TwoStep) {
            scores = score_training_records(model, working, q, cfg.cg);
        } else if (method == Method::Loss) {
            scores = loss_scores(model, working); // highest loss first
        } else {
            scores = self_influence_scores(model, working, cfg.cg);
            for (auto& s : scores.scores) s = -s; // most negative first
        }
        double rank_s = t_rank.elapsed();

        int budget_left = cfg.max_removals - static_cast<int>(report.removed_order.size());
        int k = std::min({cfg.k_per_iteration, budget_left, static_cast<int>(working.size())});

        IterationRecord rec;
        rec.iteration = iteration;
        rec.method = method_name(method);
        rec.q_before = has_q ? q.value(model) : std::numeric_limits<double>::quiet_NaN();
        rec.complaint_satisfied = satisfied;
        for (std::size_t i = 0; i < checked.size(); ++i)
            rec.results_csv[checked[i].name] = result_to_csv(results[i]);
        rec.removed = rank_and_remove(working, scores, k);
        for (auto id : rec.removed) rec.removed_scores.push_back(scores.by_id(id));
        report.removed_order.insert(report.removed_order.end(), rec.removed.begin(),
                                    rec.removed.end());
        report.removed_scores.insert(report.removed_scores.end(), rec.removed_scores.begin(),
                                     rec.removed_scores.end());

        Timer t_retrain;
        std::optional<ModelState> warm;
        if (cfg.warm_start) warm = model;
        model = train(working, cfg.hyper, warm);
        rec.train_s = pending_train_s;
        pending_train_s = t_retrain.elapsed();
        if (!model.converged)
            throw Error("training did not converge (grad_norm " +
                        format_double(model.grad_norm) + ")");

        rec.q_after = has_q ? q.value(model) : std::numeric_limits<double>::quiet_NaN();
        rec.encode_s = encode_s;
        rec.rank_s = rank_s;
        report.iterations.push_back(std::move(rec));
        ++iteration;
    }
}

std::string report_to_json(const DebugReport& r) {
    nlohmann::json j;
    auto iters = nlohmann::json::array();
    for (const auto& it : r.iterations) {
        nlohmann::json ji;
        ji["iteration"] = it.iteration;
        ji["method"] = it.method;
        ji["removed"] = it.removed;
        ji["removed_scores"] = it.removed_scores;
        if (!std::isnan(it.q_before)) ji["q_before"] = it.q_before;
        if (!std::isnan(it.q_after)) ji["q_after"] = it.q_after;
        ji["complaint_satisfied"] = it.complaint_satisfied;
        ji["results"] = it.results_csv;
        ji["timing"] = {{"train_s", it.train_s}, {"encode_s", it.encode_s}, {"rank_s", it.rank_s}};
        iters.push_back(std::move(ji));
    }
    j["iterations"] = std::move(iters);
    j["removed_order"] = r.removed_order;
    j["complaints_resolved"] = r.complaints_resolved;
    j["final_satisfied"] = r.final_satisfied;
    return j.dump(2);
}

std::string report_ranking_csv(const DebugReport& r) {
    std::ostringstream out;
    out << "iteration,rank,record_id,score\n";
    int rank = 0;
    for (const auto& it : r.iterations)
        for (std::size_t i = 0; i < it.removed.size(); ++i)
            out << it.iteration << "," << rank++ << "," << it.removed[i] << ","
                << format_double(it.removed_scores[i]) << "\n";
    return out.str();
}

} // namespace rain
