#pragma once

#include "rain/holistic.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rain {

/// ILP over one-hot prediction assignments t_{i,j}. One entity per queried
/// row that appears in complaint-relevant polynomials; the objective counts
/// entities whose assigned class differs from the current prediction.
struct IlpInstance {
    std::vector<RowKey> entities; // sorted: branching follows this order
    int classes = 2;
    std::vector<int> current; // r_i per entity

    /// lo <= sum coeff_{e,c} * t_{e,c} <= hi
    struct Linear {
        std::vector<std::tuple<int, int, double>> coeffs; // (entity, class, coeff)
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
    };
    std::vector<Linear> linear;

    /// "not all literals hold": from DNF conjuncts of falsified polynomials
    struct Conjunct {
        std::vector<std::tuple<int, int, bool>> literals; // (entity, class, positive)
    };
    std::vector<Conjunct> forbidden;

    std::vector<std::optional<int>> fixed; // prediction complaints

    int entity_of(const RowKey& row) const; // -1 when absent
    std::string to_lp_string() const;
};

struct IlpAssignment {
    std::vector<int> assigned; // class per entity, aligned with IlpInstance::entities
    int objective = 0;
    bool feasible = false;
    bool unique = false;
};

enum class SolveStrategy { Deterministic, UniformRandom };

struct IlpLimits {
    double time_budget_s = 60.0;
    std::size_t enum_cap = 100000; // minimal-solution enumeration cap
    std::size_t dnf_cap = 1000;    // DNF expansion cap per falsified polynomial
};

/// Compile complaints against captured provenance into an ILP. Supported
/// shapes: COUNT/SUM/AVG comparisons whose terms are plain atoms, count-to-
/// zero and tuple-deletion complaints (falsified polynomials), and prediction
/// complaints (fixed assignments). Anything else raises UnsupportedError.
IlpInstance build_ilp(const std::vector<Complaint>& cs,
                      const std::vector<QueryDebugContext>& queries, const Views& views,
                      int classes, const IlpLimits& limits = {});

/// Depth-first branch and bound, lowest-row-id-first branching. Deterministic
/// strategy returns the provably minimal assignment that the search order
/// reaches first; UniformRandom enumerates all minimal solutions (up to
/// enum_cap) and draws one with `seed`.
IlpAssignment solve_ilp(const IlpInstance& ilp, SolveStrategy strategy, std::uint64_t seed = 0,
                        const IlpLimits& limits = {});

struct AmbiguityCount {
    long long count = 0;
    bool exact = true; // false means "at least `count`"
};

/// Number of distinct minimal-objective solutions, exact up to `cap`.
AmbiguityCount ambiguity_count(const IlpInstance& ilp, long long cap,
                               const IlpLimits& limits = {});

enum class MispredictionMode { MarkedOnly, All };

/// q(theta) = -sum p_{t_i}(x_i, theta) over the marked mispredictions
/// (t_i != r_i), or over every entity in `All` mode.
QFunction encode_mispredictions(const IlpAssignment& a, const IlpInstance& ilp,
                                const ModelState& m,
                                std::shared_ptr<const FeatureSource> features,
                                MispredictionMode mode = MispredictionMode::MarkedOnly);

} // namespace rain
