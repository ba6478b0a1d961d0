#include "rain/twostep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace rain {

int IlpInstance::entity_of(const RowKey& row) const {
    auto it = std::lower_bound(entities.begin(), entities.end(), row);
    if (it == entities.end() || !(*it == row)) return -1;
    return static_cast<int>(it - entities.begin());
}

std::string IlpInstance::to_lp_string() const {
    std::ostringstream out;
    out << "minimize sum_i [t_i != r_i]\n";
    out << "entities (" << entities.size() << "), classes " << classes << ":\n";
    for (std::size_t i = 0; i < entities.size(); ++i) {
        out << "  t[" << entities[i].rel << "=" << entities[i].row << "] current " << current[i];
        if (fixed[i]) out << " fixed " << *fixed[i];
        out << "\n";
    }
    out << "subject to:\n";
    for (const auto& lc : linear) {
        out << " ";
        for (const auto& [e, c, w] : lc.coeffs)
            out << " + " << format_double(w) << "*t[" << entities[e].rel << "="
                << entities[e].row << "," << c << "]";
        out << " in [" << format_double(lc.lo) << ", " << format_double(lc.hi) << "]\n";
    }
    for (const auto& fc : forbidden) {
        out << "  forbid:";
        for (const auto& [e, c, pos] : fc.literals)
            out << " " << (pos ? "" : "!") << "t[" << entities[e].rel << "=" << entities[e].row
                << "," << c << "]";
        out << "\n";
    }
    return out.str();
}

// -------------------------------------------------------------- DNF expansion

namespace {

struct Literal {
    RowKey row;
    int cls = 0;
    bool positive = true;
};
using DnfConjunct = std::vector<Literal>;
using Dnf = std::vector<DnfConjunct>;

// nullopt = contradictory conjunct
std::optional<DnfConjunct> simplify_conjunct(const DnfConjunct& in) {
    DnfConjunct out;
    for (const auto& lit : in) {
        bool redundant = false;
        for (auto& have : out) {
            if (!(have.row == lit.row)) continue;
            if (have.positive && lit.positive) {
                if (have.cls != lit.cls) return std::nullopt; // one-hot conflict
                redundant = true;
            } else if (have.positive && !lit.positive) {
                if (have.cls == lit.cls) return std::nullopt;
                redundant = true; // t=c already implies t!=c'
            } else if (!have.positive && lit.positive) {
                if (have.cls == lit.cls) return std::nullopt;
                have = lit; // upgrade to the positive literal
                redundant = true;
            } else if (have.cls == lit.cls) {
                redundant = true;
            }
        }
        if (!redundant) out.push_back(lit);
    }
    return out;
}

Dnf poly_dnf(const Poly& p, bool negate, std::size_t cap) {
    switch (p.kind) {
    case Poly::Kind::Atom: return {{Literal{p.row, p.cls, !negate}}};
    case Poly::Kind::True: return negate ? Dnf{} : Dnf{{}};
    case Poly::Kind::False: return negate ? Dnf{{}} : Dnf{};
    case Poly::Kind::Not: return poly_dnf(*p.children[0], !negate, cap);
    case Poly::Kind::And:
    case Poly::Kind::Or: {
        bool conj = (p.kind == Poly::Kind::And) != negate; // negation swaps the connective
        if (!conj) {
            Dnf out;
            for (const auto& c : p.children) {
                Dnf sub = poly_dnf(*c, negate, cap);
                out.insert(out.end(), sub.begin(), sub.end());
                if (out.size() > cap) throw CapError("DNF expansion exceeded cap");
            }
            return out;
        }
        Dnf out{{}};
        for (const auto& c : p.children) {
            Dnf sub = poly_dnf(*c, negate, cap);
            Dnf next;
            for (const auto& a : out)
                for (const auto& b : sub) {
                    DnfConjunct merged = a;
                    merged.insert(merged.end(), b.begin(), b.end());
                    if (auto s = simplify_conjunct(merged)) next.push_back(std::move(*s));
                    if (next.size() > cap) throw CapError("DNF expansion exceeded cap");
                }
            out = std::move(next);
        }
        return out;
    }
    }
    return {};
}

} // namespace

// ------------------------------------------------------------------ build_ilp

IlpInstance build_ilp(const std::vector<Complaint>& cs,
                      const std::vector<QueryDebugContext>& queries, const Views& views,
                      int classes, const IlpLimits& limits) {
    // staged in RowKey space, remapped to entity indices at the end
    struct StagedLinear {
        std::vector<std::tuple<RowKey, int, double>> coeffs;
        double lo, hi;
    };
    std::vector<StagedLinear> staged_linear;
    std::vector<DnfConjunct> staged_forbidden;
    std::map<RowKey, int> staged_fixed;
    std::set<RowKey> rows;

    auto context_of = [&](const Complaint& c) -> const QueryDebugContext& {
        for (const auto& q : queries)
            if (q.name == c.query || c.query.empty()) return q;
        throw EvalError("complaint refers to unknown query '" + c.query + "'");
    };

    auto falsify = [&](const Poly& poly) {
        Dnf dnf = poly_dnf(poly, false, limits.dnf_cap);
        for (auto& conj : dnf) {
            if (conj.empty())
                throw IlpInfeasibleError("complaint requires falsifying a tautology");
            for (const auto& lit : conj) rows.insert(lit.row);
            staged_forbidden.push_back(std::move(conj));
        }
    };

    for (const auto& c : cs) {
        switch (c.kind) {
        case Complaint::Kind::Prediction: {
            if (!c.target.row_id) throw EvalError("prediction complaint needs row_id");
            std::string rel;
            if (c.target.rel) {
                rel = *c.target.rel;
            } else if (views.size() == 1) {
                rel = views.begin()->first;
            } else {
                throw EvalError("prediction complaint needs 'rel' with several views");
            }
            RowKey key{rel, *c.target.row_id};
            int cls = static_cast<int>(c.desired);
            auto [it, fresh] = staged_fixed.insert({key, cls});
            if (!fresh && it->second != cls)
                throw IlpInfeasibleError("conflicting prediction complaints on one row");
            rows.insert(key);
            break;
        }
        case Complaint::Kind::Tuple: {
            if (c.target.group_key)
                throw UnsupportedError("group-existence complaints are not supported");
            const auto& ctx = context_of(c);
            std::string key = complaint_result_key(c);
            const auto* out = ctx.prov->find(key);
            // already-dropped tuples are satisfied complaints, nothing to falsify
            if (!out) {
                if (ctx.result->find(key))
                    throw EvalError("tuple complaint: no provenance for key '" + key + "'");
                break;
            }
            falsify(*out->existence);
            break;
        }
        case Complaint::Kind::Value: {
            const auto& ctx = context_of(c);
            std::string key = complaint_result_key(c);
            const auto* out = ctx.prov->find(key);
            if (!out) throw EvalError("value complaint: no output with key '" + key + "'");
            std::string attr = c.attr;
            if (attr.empty()) {
                if (out->aggregates.size() != 1)
                    throw EvalError("value complaint needs 'attr'");
                attr = out->aggregates.begin()->first;
            }
            auto agg_it = out->aggregates.find(attr);
            if (agg_it == out->aggregates.end())
                throw EvalError("value complaint: no aggregate provenance for '" + attr + "'");
            const AggPoly& agg = agg_it->second;

            double target = c.desired * (agg.denominator ? *agg.denominator : 1.0);
            double offset = 0.0;
            bool atomic = true;
            for (const auto& t : agg.terms) {
                if (t.poly->kind == Poly::Kind::True) offset += t.coeff;
                else if (t.poly->kind == Poly::Kind::Atom) continue;
                else if (t.poly->kind != Poly::Kind::False) atomic = false;
            }
            if (atomic) {
                StagedLinear lc;
                double rhs = target - offset;
                lc.lo = c.op == CmpOp::Le ? -std::numeric_limits<double>::infinity() : rhs;
                lc.hi = c.op == CmpOp::Ge ? std::numeric_limits<double>::infinity() : rhs;
                for (const auto& t : agg.terms) {
                    if (t.poly->kind != Poly::Kind::Atom) continue;
                    lc.coeffs.push_back({t.poly->row, t.poly->cls, t.coeff});
                    rows.insert(t.poly->row);
                }
                staged_linear.push_back(std::move(lc));
            } else {
                // non-atomic terms: only "force the whole sum to zero" is
                // expressible without auxiliary variables
                bool zero_target = target - offset == 0.0;
                bool nonneg = true;
                for (const auto& t : agg.terms) nonneg &= t.coeff >= 0.0;
                bool op_ok = c.op == CmpOp::Eq || c.op == CmpOp::Le;
                if (!zero_target || !nonneg || !op_ok)
                    throw UnsupportedError(
                        "aggregate complaint over non-atomic provenance terms is only supported "
                        "for a zero target");
                for (const auto& t : agg.terms)
                    if (t.poly->kind != Poly::Kind::True && t.poly->kind != Poly::Kind::False &&
                        t.coeff != 0.0)
                        falsify(*t.poly);
            }
            break;
        }
        }
    }

    IlpInstance ilp;
    ilp.classes = classes;
    ilp.entities.assign(rows.begin(), rows.end());
    ilp.current.resize(ilp.entities.size());
    ilp.fixed.resize(ilp.entities.size());
    for (std::size_t i = 0; i < ilp.entities.size(); ++i) {
        const RowKey& key = ilp.entities[i];
        auto vit = views.find(key.rel);
        if (vit == views.end()) throw EvalError("missing prediction view for " + key.rel);
        ilp.current[i] = vit->second.at(key.row).predicted_class;
        auto fit = staged_fixed.find(key);
        if (fit != staged_fixed.end()) ilp.fixed[i] = fit->second;
    }
    for (const auto& sl : staged_linear) {
        IlpInstance::Linear lc;
        lc.lo = sl.lo;
        lc.hi = sl.hi;
        for (const auto& [row, cls, w] : sl.coeffs)
            lc.coeffs.push_back({ilp.entity_of(row), cls, w});
        ilp.linear.push_back(std::move(lc));
    }
    for (const auto& conj : staged_forbidden) {
        IlpInstance::Conjunct fc;
        for (const auto& lit : conj)
            fc.literals.push_back({ilp.entity_of(lit.row), lit.cls, lit.positive});
        ilp.forbidden.push_back(std::move(fc));
    }
    return ilp;
}

// --------------------------------------------------------------- B&B search

namespace {

struct Searcher {
    const IlpInstance& ilp;
    const IlpLimits& limits;
    int n = 0;
    // dense per-constraint coefficient lookup: coeff[c][entity*classes + cls]
    std::vector<std::vector<double>> coeff;
    // suffix bounds over entities i..n-1 for each constraint
    std::vector<std::vector<double>> suff_min, suff_max, suff_keep, suff_max_gain, suff_max_drop;
    // conjuncts indexed by the last (largest) non-fixed entity they mention;
    // fixed entities are decided before the search starts
    std::vector<std::vector<int>> conjuncts_ending_at;
    std::vector<int> all_fixed_conjuncts;
    std::vector<int> fixed_changes_rest; // forced flips among fixed entities >= depth

    std::vector<int> assign;
    std::vector<double> cur; // per-constraint partial sum
    long long nodes = 0;
    std::chrono::steady_clock::time_point deadline;

    explicit Searcher(const IlpInstance& inst, const IlpLimits& lim)
        : ilp(inst), limits(lim), n(static_cast<int>(inst.entities.size())) {
        int c = ilp.classes;
        coeff.assign(ilp.linear.size(), std::vector<double>(static_cast<std::size_t>(n) * c, 0.0));
        for (std::size_t k = 0; k < ilp.linear.size(); ++k)
            for (const auto& [e, cls, w] : ilp.linear[k].coeffs)
                coeff[k][static_cast<std::size_t>(e) * c + cls] += w;

        auto zero = std::vector<double>(n + 1, 0.0);
        suff_min.assign(ilp.linear.size(), zero);
        suff_max.assign(ilp.linear.size(), zero);
        suff_keep.assign(ilp.linear.size(), zero);
        suff_max_gain.assign(ilp.linear.size(), zero);
        suff_max_drop.assign(ilp.linear.size(), zero);
        for (std::size_t k = 0; k < ilp.linear.size(); ++k) {
            for (int i = n - 1; i >= 0; --i) {
                double mn = std::numeric_limits<double>::infinity(), mx = -mn;
                for (int cls = 0; cls < c; ++cls) {
                    if (ilp.fixed[i] && *ilp.fixed[i] != cls) continue;
                    double w = coeff[k][static_cast<std::size_t>(i) * c + cls];
                    mn = std::min(mn, w);
                    mx = std::max(mx, w);
                }
                double keep = ilp.fixed[i] ? coeff[k][static_cast<std::size_t>(i) * c + *ilp.fixed[i]]
                                           : coeff[k][static_cast<std::size_t>(i) * c + ilp.current[i]];
                suff_min[k][i] = suff_min[k][i + 1] + mn;
                suff_max[k][i] = suff_max[k][i + 1] + mx;
                suff_keep[k][i] = suff_keep[k][i + 1] + keep;
                suff_max_gain[k][i] = std::max(suff_max_gain[k][i + 1], mx - keep);
                suff_max_drop[k][i] = std::max(suff_max_drop[k][i + 1], keep - mn);
            }
        }
        conjuncts_ending_at.assign(std::max(n, 1), {});
        for (std::size_t f = 0; f < ilp.forbidden.size(); ++f) {
            int last = -1;
            for (const auto& [e, cls, pos] : ilp.forbidden[f].literals)
                if (!ilp.fixed[e]) last = std::max(last, e);
            if (last >= 0) conjuncts_ending_at[last].push_back(static_cast<int>(f));
            else all_fixed_conjuncts.push_back(static_cast<int>(f));
        }
        fixed_changes_rest.assign(n + 1, 0);
        for (int i = n - 1; i >= 0; --i)
            fixed_changes_rest[i] =
                fixed_changes_rest[i + 1] + (ilp.fixed[i] && *ilp.fixed[i] != ilp.current[i]);
        assign.assign(n, -1);
        cur.assign(ilp.linear.size(), 0.0);
    }

    void start_clock() {
        deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(limits.time_budget_s));
    }

    void tick() {
        if ((++nodes & 4095) == 0 && std::chrono::steady_clock::now() > deadline)
            throw IlpTimeoutError("ILP time budget exceeded");
    }

    bool literal_true(const std::tuple<int, int, bool>& lit, int depth) const {
        auto [e, cls, pos] = lit;
        int v = e < depth ? assign[e] : (ilp.fixed[e] ? *ilp.fixed[e] : ilp.current[e]);
        return pos ? v == cls : v != cls;
    }

    // conjuncts fully decided at `depth` whose literals all hold -> violation
    bool violates_completed(int depth) const {
        auto conjunct_holds = [&](int f) {
            for (const auto& lit : ilp.forbidden[f].literals)
                if (!literal_true(lit, depth)) return false;
            return true;
        };
        if (depth == 0) {
            for (int f : all_fixed_conjuncts)
                if (conjunct_holds(f)) return true;
            return false;
        }
        for (int f : conjuncts_ending_at[depth - 1])
            if (conjunct_holds(f)) return true;
        return false;
    }

    // admissible lower bound on additional changes below `depth`
    int lower_bound(int depth) const {
        int lb_linear = 0;
        for (std::size_t k = 0; k < ilp.linear.size(); ++k) {
            double keep = cur[k] + suff_keep[k][depth];
            double need = 0.0, swing = 0.0;
            if (keep < ilp.linear[k].lo) {
                need = ilp.linear[k].lo - keep;
                swing = suff_max_gain[k][depth];
            } else if (keep > ilp.linear[k].hi) {
                need = keep - ilp.linear[k].hi;
                swing = suff_max_drop[k][depth];
            }
            if (need > 1e-9) {
                if (swing <= 0.0) return std::numeric_limits<int>::max() / 2;
                lb_linear = std::max(lb_linear,
                                     static_cast<int>(std::ceil(need / swing - 1e-12)));
            }
        }

        // conjuncts that hold under keep-current need one flip among their
        // undecided entities; a conjunct whose only undecided entity is e
        // forces e outright, and the forced set is additive with a disjoint
        // set of conflicts over the remaining entities
        std::vector<char> used(static_cast<std::size_t>(n), 0);
        int forced = 0;
        std::vector<std::vector<int>> pending; // multi-entity conflicts
        for (const auto& fc : ilp.forbidden) {
            bool holds = true;
            std::vector<int> undecided;
            for (const auto& lit : fc.literals) {
                if (!literal_true(lit, depth)) {
                    holds = false;
                    break;
                }
                int e = std::get<0>(lit);
                if (e >= depth && !ilp.fixed[e] &&
                    std::find(undecided.begin(), undecided.end(), e) == undecided.end())
                    undecided.push_back(e);
            }
            if (!holds || undecided.empty()) continue;
            if (undecided.size() == 1) {
                if (!used[undecided[0]]) {
                    used[undecided[0]] = 1;
                    ++forced;
                }
            } else {
                pending.push_back(std::move(undecided));
            }
        }
        int match = 0;
        for (const auto& undecided : pending) {
            bool free = true;
            for (int e : undecided)
                if (used[e]) free = false;
            if (!free) continue;
            for (int e : undecided) used[e] = 1;
            ++match;
        }
        // fixed entities below `depth` pay their flips regardless
        return std::max(lb_linear, fixed_changes_rest[depth] + forced + match);
    }

    bool linear_feasible_range(int depth) const {
        for (std::size_t k = 0; k < ilp.linear.size(); ++k) {
            if (cur[k] + suff_max[k][depth] < ilp.linear[k].lo - 1e-9) return false;
            if (cur[k] + suff_min[k][depth] > ilp.linear[k].hi + 1e-9) return false;
        }
        return true;
    }

    // visit(assignment, changes) for each feasible full assignment with
    // changes + bound pruned against `prune_above`; returns false from visit
    // to stop the search.
    template <typename Visit>
    bool dfs(int depth, int changes, int prune_above, const Visit& visit) {
        tick();
        if (!linear_feasible_range(depth)) return true;
        if (violates_completed(depth)) return true;
        int lb = lower_bound(depth);
        if (changes + lb > prune_above) return true;
        if (depth == n) return visit(assign, changes);

        int c = ilp.classes;
        int cur_cls = ilp.current[depth];
        auto try_class = [&](int cls) -> bool {
            int add = cls == cur_cls ? 0 : 1;
            if (changes + add > prune_above) return true;
            assign[depth] = cls;
            for (std::size_t k = 0; k < ilp.linear.size(); ++k)
                cur[k] += coeff[k][static_cast<std::size_t>(depth) * c + cls];
            bool keep_going = dfs(depth + 1, changes + add, prune_above, visit);
            for (std::size_t k = 0; k < ilp.linear.size(); ++k)
                cur[k] -= coeff[k][static_cast<std::size_t>(depth) * c + cls];
            assign[depth] = -1;
            return keep_going;
        };

        if (ilp.fixed[depth]) return try_class(*ilp.fixed[depth]);
        if (!try_class(cur_cls)) return false;
        for (int cls = 0; cls < c; ++cls)
            if (cls != cur_cls && !try_class(cls)) return false;
        return true;
    }

    // minimal objective value, or nullopt when infeasible
    std::optional<int> minimize() {
        std::optional<int> best;
        // iterative deepening on the objective keeps the search near-greedy
        for (int budget = 0; budget <= n; ++budget) {
            bool found = false;
            dfs(0, 0, budget, [&](const std::vector<int>&, int) {
                found = true;
                return false;
            });
            if (found) {
                best = budget;
                break;
            }
        }
        return best;
    }

    std::vector<std::vector<int>> enumerate(int objective, std::size_t cap, bool* capped) {
        std::vector<std::vector<int>> out;
        if (capped) *capped = false;
        dfs(0, 0, objective, [&](const std::vector<int>& a, int changes) {
            if (changes != objective) return true;
            out.push_back(a);
            if (out.size() >= cap) {
                if (capped) *capped = true;
                return false;
            }
            return true;
        });
        return out;
    }
};

} // namespace

IlpAssignment solve_ilp(const IlpInstance& ilp, SolveStrategy strategy, std::uint64_t seed,
                        const IlpLimits& limits) {
    Searcher s(ilp, limits);
    s.start_clock();
    auto best = s.minimize();
    if (!best) throw IlpInfeasibleError("no prediction assignment satisfies the complaints");

    bool capped = false;
    IlpAssignment out;
    out.feasible = true;
    out.objective = *best;
    if (strategy == SolveStrategy::Deterministic) {
        auto sols = s.enumerate(*best, 2, &capped);
        out.assigned = sols.front();
        out.unique = sols.size() == 1 && !capped;
    } else {
        auto sols = s.enumerate(*best, limits.enum_cap, &capped);
        out.unique = sols.size() == 1 && !capped;
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, sols.size() - 1);
        out.assigned = sols[pick(rng)];
    }
    return out;
}

AmbiguityCount ambiguity_count(const IlpInstance& ilp, long long cap, const IlpLimits& limits) {
    Searcher s(ilp, limits);
    s.start_clock();
    auto best = s.minimize();
    AmbiguityCount out;
    if (!best) return out; // zero solutions, exact
    bool capped = false;
    auto sols = s.enumerate(*best, static_cast<std::size_t>(cap), &capped);
    out.count = static_cast<long long>(sols.size());
    out.exact = !capped;
    return out;
}

QFunction encode_mispredictions(const IlpAssignment& a, const IlpInstance& ilp,
                                const ModelState& m,
                                std::shared_ptr<const FeatureSource> features,
                                MispredictionMode mode) {
    if (!a.feasible) throw EvalError("encode_mispredictions requires a feasible assignment");
    (void)m;
    struct Marked {
        RowKey row;
        int target;
    };
    auto marked = std::make_shared<std::vector<Marked>>();
    for (std::size_t i = 0; i < ilp.entities.size(); ++i) {
        if (mode == MispredictionMode::MarkedOnly && a.assigned[i] == ilp.current[i]) continue;
        marked->push_back({ilp.entities[i], a.assigned[i]});
    }
    QFunction q;
    q.description = "mispredictions(" + std::to_string(marked->size()) + " rows)";
    q.value = [marked, features](const ModelState& model) {
        double v = 0.0;
        for (const auto& mk : *marked)
            v -= predict_proba(model, features->at(mk.row))[mk.target];
        return v;
    };
    q.grad = [marked, features](const ModelState& model) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(model.param_dim());
        for (const auto& mk : *marked)
            g -= predict_proba_grad(model, features->at(mk.row), mk.target);
        return g;
    };
    return q;
}

} // namespace rain
