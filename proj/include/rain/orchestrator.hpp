#pragma once

#include "rain/twostep.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace rain {

enum class Method { Holistic, TwoStep, Loss, InfLoss, Auto };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct NamedQuery {
    std::string name;
    QueryPlan plan; // validated inside debug()
};

struct SessionConfig {
    Method method = Method::Auto;
    int k_per_iteration = 10;
    int max_removals = 100;
    Hyper hyper;
    CgSettings cg;
    std::uint64_t seed = 0;
    bool warm_start = true; // reuse the previous iteration's theta
    bool exact_or = false;  // Holistic exact-OR mode for exclusive branches
    SolveStrategy ilp_strategy = SolveStrategy::Deterministic;
    IlpLimits ilp_limits;
    long long chooser_cap = 2; // ambiguity probe for method=auto
    MispredictionMode twostep_mode = MispredictionMode::MarkedOnly;
};

struct IterationRecord {
    int iteration = 0;
    std::string method;
    std::vector<std::int64_t> removed; // rank order
    std::vector<double> removed_scores;
    double q_before = 0.0;
    double q_after = 0.0;
    std::map<std::string, std::string> results_csv; // concrete results per query
    std::vector<bool> complaint_satisfied;
    double train_s = 0.0, encode_s = 0.0, rank_s = 0.0;
};

struct DebugReport {
    std::vector<IterationRecord> iterations;
    std::vector<std::int64_t> removed_order; // cumulative, rank order
    std::vector<double> removed_scores;
    bool complaints_resolved = false;
    std::vector<bool> final_satisfied;
    ModelState final_model;
};

std::string report_to_json(const DebugReport& r);
std::string report_ranking_csv(const DebugReport& r);

/// TwoStep when the complaint has a unique minimal fix, Holistic otherwise
/// (ambiguous, infeasible, or not ILP-expressible).
Method choose_method(const std::vector<Complaint>& cs,
                     const std::vector<QueryDebugContext>& queries, const Views& views,
                     int classes, long long cap, const IlpLimits& limits = {});

/// Deterministic top-k by descending score, ties by ascending record id;
/// removes the picked records from `working`.
std::vector<std::int64_t> rank_and_remove(TrainingSet& working, const InfluenceScores& scores,
                                          int k);

/// The train-rank-fix loop: (re)train, execute, encode complaints under the
/// selected method, score, drop the top-k, until every complaint is concretely
/// satisfied or the removal budget is spent.
DebugReport debug(const SessionConfig& cfg, const std::vector<NamedQuery>& queries,
                  const std::vector<Complaint>& complaints, const TrainingSet& ts,
                  const Catalog& db);

} // namespace rain
