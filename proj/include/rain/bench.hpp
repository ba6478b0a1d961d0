#pragma once

#include "rain/orchestrator.hpp"

#include <memory>
#include <set>

namespace rain {

// -------------------------------------------------------------------- metrics

struct MetricSeries {
    std::vector<double> recalls; // r_k for k = 1..K, K = |corrupted|
    double auc = 0.0;            // (2/K) * sum r_k
};

std::vector<double> recall_curve(const std::vector<std::int64_t>& ranked,
                                 const std::set<std::int64_t>& corrupted);
double auc_cr(const std::vector<double>& recalls);
MetricSeries corruption_metrics(const std::vector<std::int64_t>& ranked,
                                const std::set<std::int64_t>& corrupted);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// -------------------------------------------------------------------- oracles

struct MinFixResult {
    bool found = false;
    std::vector<std::set<std::int64_t>> subsets; // all minimal-size fixes
    std::size_t retrains = 0;
};

/// Exhaustive deletion-set search: enumerate subsets by increasing size,
/// retrain cold at tight tolerance, re-execute, keep the minimal subsets that
/// concretely satisfy every complaint. `found == false` means nothing within
/// max_subset_size works.
MinFixResult brute_force_min_fix(const TrainingSet& ts, const Catalog& db,
                                 const std::vector<NamedQuery>& queries,
                                 const std::vector<Complaint>& complaints, const Hyper& hyper,
                                 int max_subset_size, std::size_t max_retrains = 2000000);

/// Exact leave-one-out effect on q by full retraining (cold starts, tight
/// tolerance). Returned in training-set order.
std::vector<double> loo_retrain_delta_q(const TrainingSet& ts, const QFunction& q,
                                        const Hyper& hyper);

// -------------------------------------------- analytic limiting constructions

/// A training set with one noisily labeled record whose features are exactly
/// orthogonal (disjoint coordinate blocks) to everything else, plus n queried
/// rows of which only m overlap the noisy direction. The count complaint
/// admits C(n,k) minimal ILP fixes, and only fixes touching the m overlapping
/// rows can give the noisy record a nonzero influence score.
struct OrthogonalDecoy {
    TrainingSet train;
    std::int64_t noisy_id = 0;
    std::shared_ptr<Relation> queried;
    QueryPlan plan;      // COUNT(*) WHERE PREDICT(q) = 0
    Complaint complaint; // count = k
    int n = 0, m = 0, k = 0;
    Catalog catalog() const;
};
OrthogonalDecoy make_orthogonal_decoy(int n, int m, int k, std::uint64_t seed);

struct DecoyStats {
    long long minimal_solutions = 0;
    bool exact = true;
    double nonzero_freq = 0.0; // over uniform-random solver draws
    int draws = 0;
};
DecoyStats run_orthogonal_decoy(const OrthogonalDecoy& inst, int draws, const SessionConfig& cfg);

/// Many corrupted records with pairwise parallel features (one reserved axis),
/// inverted labels, and an orthogonal clean block. The model overfits the
/// corrupted block, driving its losses and self-influence to zero, while a
/// single prediction complaint on a parallel queried row scores exactly the
/// corrupted records positive and the clean ones zero.
struct MaskedCorruption {
    TrainingSet train;
    std::set<std::int64_t> corrupted_ids;
    std::shared_ptr<Relation> queried;
    Complaint complaint; // prediction complaint on the parallel mispredicted row
    Catalog catalog() const;
};
MaskedCorruption make_masked_corruption(int corrupted_count, int clean_count, std::uint64_t seed);

struct MaskStats {
    double max_loss_corrupted = 0.0;
    double min_self_influence_corrupted = 0.0; // most negative
    double min_score_corrupted = 0.0;          // complaint-based influence
    double max_abs_score_clean = 0.0;
    MetricSeries metrics; // complaint-based ranking vs corrupted ids
};
MaskStats run_masked_corruption(const MaskedCorruption& inst, const SessionConfig& cfg);

// ----------------------------------------------------- synthetic experiments

/// Two-class Gaussian blobs with a systematic label flip inside a feature
/// subspace, a queried sample from the same distribution, and a COUNT query
/// over the positive predictions.
struct PlantedBlobs {
    TrainingSet train; // corrupted
    std::set<std::int64_t> corrupted_ids;
    std::shared_ptr<Relation> queried;
    QueryPlan plan; // COUNT(*) WHERE PREDICT(q) = 1
    double true_count = 0.0;
    Catalog catalog() const;
};
PlantedBlobs make_planted_blobs(int n_train, int n_query, int dim, double flip_rate,
                                std::uint64_t seed);

struct MethodRun {
    std::vector<std::int64_t> ranked;
    MetricSeries metrics;
    bool resolved = false;
    DebugReport report;
};
MethodRun run_corruption_experiment(Method method, const PlantedBlobs& inst,
                                    double complaint_value, SessionConfig cfg);

/// Tiny two-cluster instance with a single planted flip that provably causes
/// an undercount; sized for the exhaustive deletion oracle.
struct MicroInstance {
    TrainingSet train;
    std::int64_t planted_id = 0;
    std::shared_ptr<Relation> queried;
    QueryPlan plan;
    double true_count = 0.0;
    Catalog catalog() const;
};
MicroInstance make_micro_instance(std::uint64_t seed);

/// Multiclass join experiment: L holds classes {0,1}, R holds {2,3}, a
/// fraction of class-1 training labels is flipped to 3, and PREDICT(L) =
/// PREDICT(R) should produce nothing. Complaints are tuple deletions on the
/// spurious join tuples; a fraction alpha is replaced by exact prediction
/// complaints on both sides.
struct JoinAmbiguity {
    TrainingSet train;
    std::set<std::int64_t> corrupted_ids;
    std::shared_ptr<Relation> left, right;
    std::map<std::int64_t, int> left_truth, right_truth;
    QueryPlan plan; // SELECT * FROM L, R WHERE PREDICT(L) = PREDICT(R)
    Catalog catalog() const;
};
JoinAmbiguity make_join_ambiguity(std::uint64_t seed);

std::vector<Complaint> ambiguity_complaints(const JoinAmbiguity& inst, const ResultSet& joined,
                                            double alpha, std::uint64_t seed);

struct SweepPoint {
    double alpha = 0.0;
    int n_complaints = 0;
    double auc_twostep = 0.0;
    double auc_holistic = 0.0;
};
SweepPoint run_ambiguity_sweep_point(const JoinAmbiguity& inst, double alpha, SessionConfig cfg);

} // namespace rain
