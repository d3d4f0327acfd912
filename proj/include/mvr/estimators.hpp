#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvr/mc.hpp"
#include "mvr/model.hpp"
#include "mvr/rng.hpp"

namespace mvr::estimators {

// Level numbering: level 0 is the full-model correction s_h - s_{N_1}, level
// l in 1..L-1 is s_{N_l} - s_{N_{l+1}}, level L is the coarsest RB output
// s_{N_L} alone.
struct LevelSpec {
    std::vector<int> N;  // strictly decreasing RB dimensions N_1 > ... > N_L

    int levels() const { return int(N.size()); }  // L; channels are 0..L

    void validate(int n_max) const {
        if (N.empty()) throw std::invalid_argument("LevelSpec: need at least one dimension");
        if (N.front() > n_max || N.back() < 1)
            throw std::invalid_argument("LevelSpec: dimensions out of range");
        for (std::size_t i = 1; i < N.size(); ++i)
            if (!(N[i] < N[i - 1]))
                throw std::invalid_argument("LevelSpec: dimensions must be strictly decreasing");
    }
};

struct WeightVector {
    std::vector<double> w;

    void validate() const {
        if (w.empty()) throw std::invalid_argument("WeightVector: empty");
        double sum = 0.0;
        for (double v : w) {
            if (!(v > 0.0)) throw std::invalid_argument("WeightVector: weights must be > 0");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("WeightVector: weights must sum to 1");
    }
};

struct Timings {
    double t_h = 0.0;             // cost of one full-model output
    std::vector<double> t_N;      // t_N[n-1]: cost of one RB output at dimension n
};

struct LevelPlan {
    LevelSpec spec;
    WeightVector weights;
    std::vector<std::size_t> M;  // filled by the adaptive run
    double predicted_cost = 0.0;
    Timings timings;
};

// Per-level paired samples. Keeping both channel values (rather than their
// difference) lets the centered zeta variables be recomputed for any mean.
struct LevelSamples {
    std::vector<double> a;
    std::vector<double> b;  // empty on the single-channel coarsest level

    std::size_t size() const { return a.size(); }
    bool paired() const { return !b.empty(); }
};

struct MVREstimate {
    double E = 0.0;
    double V = 0.0;
    double delta_E = 0.0;
    double delta_V = 0.0;
    double a = 0.0;
    double variance_bias = 0.0;  // predicted bias of V per the mean-recentering effect

    std::vector<double> level_mean;       // means of z_l
    std::vector<double> level_variance;   // sample variances of z_l (M-1 divisor)
    std::vector<std::size_t> level_count;

    // filled by adaptive_run
    double m_equiv = 0.0;
    double run_cost = 0.0;
    double speedup = 0.0;
};

// The output models: the full channel and the RB channel at any dimension.
struct OutputChannels {
    std::function<double(const ParameterVector&)> full;
    std::function<double(int, const ParameterVector&)> reduced;
    ParameterDomain domain;
    int n_max = 0;
};

inline void validate_streams(const std::vector<SampleStream>& streams) {
    for (std::size_t i = 0; i < streams.size(); ++i)
        for (std::size_t j = i + 1; j < streams.size(); ++j)
            if (streams[i].seed() == streams[j].seed() &&
                streams[i].level_tag() == streams[j].level_tag())
                throw std::invalid_argument(
                    "level streams must be independent: duplicate (seed, tag) at levels " +
                    std::to_string(i) + " and " + std::to_string(j));
}

inline void extend_level(const OutputChannels& ch, const LevelSpec& spec, int level,
                         SampleStream& stream, std::size_t extra, LevelSamples& out) {
    const int L = spec.levels();
    for (std::size_t i = 0; i < extra; ++i) {
        const ParameterVector y = draw_one(stream, ch.domain);
        if (level == 0) {
            out.a.push_back(ch.full(y));
            out.b.push_back(ch.reduced(spec.N[0], y));
        } else if (level < L) {
            out.a.push_back(ch.reduced(spec.N[std::size_t(level) - 1], y));
            out.b.push_back(ch.reduced(spec.N[std::size_t(level)], y));
        } else {
            out.a.push_back(ch.reduced(spec.N.back(), y));
        }
    }
}

inline LevelSamples draw_level(const OutputChannels& ch, const LevelSpec& spec, int level,
                               SampleStream& stream, std::size_t m) {
    LevelSamples s;
    extend_level(ch, spec, level, stream, m, s);
    return s;
}

namespace detail {

inline std::vector<double> z_values(const LevelSamples& s) {
    std::vector<double> z(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        z[i] = s.paired() ? s.a[i] - s.b[i] : s.a[i];
    return z;
}

// centered difference channel zeta_a - zeta_b with zeta_x = (x - center)^2
inline std::vector<double> zeta_values(const LevelSamples& s, double center) {
    std::vector<double> z(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double za = (s.a[i] - center) * (s.a[i] - center);
        z[i] = s.paired() ? za - (s.b[i] - center) * (s.b[i] - center) : za;
    }
    return z;
}

}  // namespace detail

// Reduces per-level samples to the telescoping expectation and variance
// estimates with their CLT half-widths and the predicted variance bias.
inline MVREstimate reduce_levels(const std::vector<LevelSamples>& levels, double a) {
    if (levels.empty()) throw std::invalid_argument("reduce_levels: no levels");
    if (!(a > 0.0)) throw std::invalid_argument("reduce_levels: need a > 0");
    for (const auto& s : levels)
        if (s.size() < 2) throw std::invalid_argument("reduce_levels: each level needs M >= 2");
    if (levels.back().paired())
        throw std::invalid_argument("reduce_levels: the coarsest level is single-channel");

    MVREstimate est;
    est.a = a;

    mc::CompensatedSum e_sum, var_of_e;
    for (const auto& s : levels) {
        const auto mv = mc::mc_mean_var(detail::z_values(s));
        est.level_mean.push_back(mv.mean);
        est.level_variance.push_back(*mv.variance);
        est.level_count.push_back(s.size());
        e_sum.add(mv.mean);
        var_of_e.add(*mv.variance / double(s.size()));
    }
    est.E = e_sum.value();
    est.delta_E = a * std::sqrt(var_of_e.value());

    mc::CompensatedSum v_sum, var_of_v, bias;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto zeta = detail::zeta_values(levels[l], est.E);
        mc::CompensatedSum plain;  // the telescope uses plain means
        for (double z : zeta) plain.add(z);
        v_sum.add(plain.value() / double(zeta.size()));
        var_of_v.add(*mc::mc_mean_var(zeta).variance / double(zeta.size()));
        bias.add(-est.level_variance[l] / double(levels[l].size()));
    }
    est.V = v_sum.value();
    est.delta_V = a * std::sqrt(var_of_v.value());
    est.variance_bias = bias.value();
    return est;
}

inline MVREstimate multilevel_estimate(const OutputChannels& ch, const LevelSpec& spec,
                                       std::vector<SampleStream> streams,
                                       const std::vector<std::size_t>& m, double a) {
    spec.validate(ch.n_max);
    const int L = spec.levels();
    if (int(streams.size()) != L + 1 || int(m.size()) != L + 1)
        throw std::invalid_argument("multilevel_estimate: need L+1 streams and sizes");
    validate_streams(streams);
    std::vector<LevelSamples> levels;
    for (int l = 0; l <= L; ++l)
        levels.push_back(draw_level(ch, spec, l, streams[std::size_t(l)], m[std::size_t(l)]));
    return reduce_levels(levels, a);
}

inline MVREstimate two_level_estimate(const OutputChannels& ch, int n1,
                                      std::vector<SampleStream> streams, std::size_t m0,
                                      std::size_t m1, double a) {
    return multilevel_estimate(ch, LevelSpec{{n1}}, std::move(streams), {m0, m1}, a);
}

// ---------------------------------------------------------------------------
// Cost model and level selection
// ---------------------------------------------------------------------------

// cached full and RB outputs over a fixed test parameter set
struct TestStatistics {
    std::vector<double> s_h;
    std::vector<std::vector<double>> s_N;  // s_N[n-1][m] for n = 1..N_max

    int n_max() const { return int(s_N.size()); }
    std::size_t m_hat() const { return s_h.size(); }

    void validate() const {
        if (s_h.size() < 2) throw std::invalid_argument("TestStatistics: need M >= 2");
        for (const auto& col : s_N)
            if (col.size() != s_h.size())
                throw std::invalid_argument("TestStatistics: missing cached outputs");
    }
};

inline TestStatistics build_test_statistics(const OutputChannels& ch, SampleStream stream,
                                            std::size_t m_hat) {
    TestStatistics stats;
    stats.s_N.resize(std::size_t(ch.n_max));
    for (std::size_t i = 0; i < m_hat; ++i) {
        const ParameterVector y = draw_one(stream, ch.domain);
        stats.s_h.push_back(ch.full(y));
        for (int n = 1; n <= ch.n_max; ++n)
            stats.s_N[std::size_t(n) - 1].push_back(ch.reduced(n, y));
    }
    return stats;
}

// per-level terms of the equivalent cost at the candidate tuple I
inline std::vector<double> per_level_costs(const std::vector<int>& I,
                                           const TestStatistics& stats,
                                           const Timings& timings) {
    stats.validate();
    LevelSpec{I}.validate(stats.n_max());
    const int L = int(I.size());
    const auto var_of_diff = [&](const std::vector<double>& x, const std::vector<double>* y) {
        std::vector<double> d(x.size());
        for (std::size_t m = 0; m < x.size(); ++m) d[m] = y ? x[m] - (*y)[m] : x[m];
        return *mc::mc_mean_var(d).variance;
    };
    const auto t_of = [&](int n) { return timings.t_N[std::size_t(n) - 1]; };

    std::vector<double> c(std::size_t(L) + 1);
    c[0] = var_of_diff(stats.s_h, &stats.s_N[std::size_t(I[0]) - 1]) *
           (timings.t_h + t_of(I[0]));
    for (int l = 1; l < L; ++l)
        c[std::size_t(l)] = var_of_diff(stats.s_N[std::size_t(I[std::size_t(l) - 1]) - 1],
                                        &stats.s_N[std::size_t(I[std::size_t(l)]) - 1]) *
                            (t_of(I[std::size_t(l) - 1]) + t_of(I[std::size_t(l)]));
    c[std::size_t(L)] = var_of_diff(stats.s_N[std::size_t(I.back()) - 1], nullptr) *
                        t_of(I.back());
    return c;
}

// KKT-optimal weights w_l proportional to sqrt of the per-level costs
inline WeightVector optimal_weights(const std::vector<double>& costs) {
    if (costs.empty()) throw std::invalid_argument("optimal_weights: empty");
    const double floor = 1e-6;
    double sum = 0.0;
    std::vector<double> w(costs.size());
    for (std::size_t l = 0; l < costs.size(); ++l) {
        if (!(costs[l] >= 0.0))
            throw std::invalid_argument("optimal_weights: costs must be >= 0");
        w[l] = std::sqrt(costs[l]);
        sum += w[l];
    }
    if (sum == 0.0) {
        for (double& v : w) v = 1.0 / double(w.size());  // all-zero costs: uniform
        return {w};
    }
    double renorm = 0.0;
    for (double& v : w) {
        v = std::max(v / sum, floor);  // zero-cost levels get the weight floor
        renorm += v;
    }
    for (double& v : w) v /= renorm;
    return {w};
}

inline double equivalent_cost(const std::vector<double>& costs, const WeightVector& weights) {
    weights.validate();
    if (weights.w.size() != costs.size())
        throw std::invalid_argument("equivalent_cost: size mismatch");
    mc::CompensatedSum sum;
    for (std::size_t l = 0; l < costs.size(); ++l) sum.add(costs[l] / weights.w[l]);
    return sum.value();
}

namespace detail {

inline void decreasing_tuples(int L, int n_max, std::vector<int>& current,
                              const std::function<void(const std::vector<int>&)>& visit) {
    if (int(current.size()) == L) {
        visit(current);
        return;
    }
    const int hi = current.empty() ? n_max : current.back() - 1;
    const int remaining = L - int(current.size());
    for (int n = hi; n >= remaining; --n) {
        current.push_back(n);
        decreasing_tuples(L, n_max, current, visit);
        current.pop_back();
    }
}

}  // namespace detail

// Exhaustive minimization of the equivalent cost over strictly decreasing
// L-tuples; enumeration starts at the lexicographically largest tuple, and a
// strict improvement test plus a final lexicographic sweep break ties toward
// the smallest tuple.
inline LevelPlan select_levels(int L, const TestStatistics& stats, const Timings& timings) {
    stats.validate();
    if (L < 1) throw std::invalid_argument("select_levels: need L >= 1");
    if (stats.n_max() <= L) throw std::invalid_argument("select_levels: need N_max > L");

    LevelPlan best;
    bool found = false;
    std::vector<int> current;
    std::vector<std::vector<int>> candidates;
    detail::decreasing_tuples(L, stats.n_max(), current,
                              [&](const std::vector<int>& I) { candidates.push_back(I); });
    std::sort(candidates.begin(), candidates.end());  // lexicographic tie-breaking
    for (const auto& I : candidates) {
        const auto costs = per_level_costs(I, stats, timings);
        const auto w = optimal_weights(costs);
        const double c = equivalent_cost(costs, w);
        if (!found || c < best.predicted_cost) {
            found = true;
            best.spec = LevelSpec{I};
            best.weights = w;
            best.predicted_cost = c;
        }
    }
    if (!found) throw std::invalid_argument("select_levels: empty feasible set");
    best.timings = timings;
    return best;
}

struct LevelTableRow {
    int L = 0;
    std::vector<int> N;
    std::vector<double> w;
    double cost = 0.0;
    double cost_ratio = 0.0;  // cost / best cost over the table
};

inline std::vector<LevelTableRow> compare_level_counts(int l_lo, int l_hi,
                                                       const TestStatistics& stats,
                                                       const Timings& timings) {
    std::vector<LevelTableRow> table;
    double best = std::numeric_limits<double>::infinity();
    for (int L = l_lo; L <= l_hi; ++L) {
        const auto plan = select_levels(L, stats, timings);
        LevelTableRow row;
        row.L = L;
        row.N = plan.spec.N;
        row.w = plan.weights.w;
        row.cost = plan.predicted_cost;
        best = std::min(best, row.cost);
        table.push_back(row);
    }
    for (auto& row : table) row.cost_ratio = row.cost / best;
    return table;
}

// median of warm repeated evaluations, in seconds per call
template <typename F>
double measure_timing(F&& f, int reps = 5) {
    f();  // warm-up
    std::vector<double> times;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        f();
        const auto stop = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(stop - start).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

inline Timings measure_timings(const OutputChannels& ch, int reps = 5) {
    Timings t;
    SampleStream stream(12345);
    const ParameterVector y = draw_one(stream, ch.domain);
    t.t_h = measure_timing([&] { volatile double v = ch.full(y); (void)v; }, reps);
    for (int n = 1; n <= ch.n_max; ++n)
        t.t_N.push_back(
            measure_timing([&] { volatile double v = ch.reduced(n, y); (void)v; }, reps));
    return t;
}

// per-sample cost of one level under the timing model
inline double level_sample_cost(const LevelSpec& spec, int level, const Timings& t) {
    const int L = spec.levels();
    const auto t_of = [&](int n) { return t.t_N[std::size_t(n) - 1]; };
    if (level == 0) return t.t_h + t_of(spec.N[0]);
    if (level < L) return t_of(spec.N[std::size_t(level) - 1]) + t_of(spec.N[std::size_t(level)]);
    return t_of(spec.N.back());
}

struct AdaptiveOptions {
    std::size_t m_min = 30;
    double safety = 1.1;     // target inflation when growing a level
    double growth_cap = 2.0; // new samples per round capped at this multiple
    int max_rounds = 200;
};

// Grows the per-level sample sets until the CLT error split across levels by
// the weights satisfies the tolerance, then reports the estimate together
// with the realized equivalent-sample speedup.
inline MVREstimate adaptive_run(const OutputChannels& ch, const LevelPlan& plan,
                                double eps_tol, double a, std::uint64_t seed,
                                const AdaptiveOptions& opt = {}) {
    if (!(eps_tol > 0.0)) throw std::invalid_argument("adaptive_run: need eps_tol > 0");
    plan.spec.validate(ch.n_max);
    plan.weights.validate();
    const int L = plan.spec.levels();
    if (int(plan.weights.w.size()) != L + 1)
        throw std::invalid_argument("adaptive_run: weights do not match the level count");

    std::vector<SampleStream> streams;
    for (int l = 0; l <= L; ++l) streams.push_back(SampleStream::derive(seed, 0, std::uint64_t(l)));
    std::vector<LevelSamples> levels(std::size_t(L) + 1);
    std::vector<std::vector<double>> var_history(std::size_t(L) + 1);

    for (int l = 0; l <= L; ++l)
        extend_level(ch, plan.spec, l, streams[std::size_t(l)], opt.m_min,
                     levels[std::size_t(l)]);

    for (int round = 0; round < opt.max_rounds; ++round) {
        bool satisfied = true;
        for (int l = 0; l <= L; ++l) {
            auto& s = levels[std::size_t(l)];
            const double vz = *mc::mc_mean_var(detail::z_values(s)).variance;
            auto& hist = var_history[std::size_t(l)];
            hist.push_back(vz);
            if (hist.size() >= 4 && hist[hist.size() - 1] > 10.0 * hist[hist.size() - 4] &&
                hist[hist.size() - 4] > 0.0) {
                std::ostringstream msg;
                msg << "adaptive_run: variance estimate on level " << l
                    << " grew more than 10x over 3 batches (";
                for (std::size_t k = hist.size() - 4; k < hist.size(); ++k)
                    msg << hist[k] << (k + 1 < hist.size() ? " -> " : ")");
                throw std::runtime_error(msg.str());
            }
            const double required_exact =
                a * a * vz / (plan.weights.w[std::size_t(l)] * eps_tol * eps_tol);
            const double required = std::max(double(opt.m_min), std::ceil(required_exact));
            if (double(s.size()) >= required) continue;
            satisfied = false;
            const double target =
                std::max(double(opt.m_min), std::ceil(opt.safety * required_exact));
            const double cap =
                std::max(opt.growth_cap * double(s.size()), double(s.size() + 1));
            const std::size_t next = std::size_t(std::min(target, cap));
            extend_level(ch, plan.spec, l, streams[std::size_t(l)], next - s.size(), s);
        }
        if (satisfied) break;
        if (round + 1 == opt.max_rounds)
            throw std::runtime_error("adaptive_run: tolerance not reached in max rounds");
    }

    MVREstimate est = reduce_levels(levels, a);
    mc::CompensatedSum cost;
    for (int l = 0; l <= L; ++l)
        cost.add(double(levels[std::size_t(l)].size()) *
                 level_sample_cost(plan.spec, l, plan.timings));
    est.run_cost = cost.value();
    est.m_equiv = std::ceil(a * a * std::max(est.V, 0.0) / (eps_tol * eps_tol));
    est.speedup = est.run_cost > 0.0 ? plan.timings.t_h * est.m_equiv / est.run_cost : 0.0;
    return est;
}

}  // namespace mvr::estimators
