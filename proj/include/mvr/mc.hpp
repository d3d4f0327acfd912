#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mvr::mc {

// Neumaier-compensated sum; keeps estimator accumulation exact enough for
// sample counts up to 1e8.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct MeanVar {
    double mean = 0.0;
    std::optional<double> variance;  // unavailable for M < 2
};

inline MeanVar mc_mean_var(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("mc_mean_var: need M >= 1");
    for (double s : samples)
        if (!std::isfinite(s)) throw std::invalid_argument("mc_mean_var: non-finite sample");
    CompensatedSum sum;
    for (double s : samples) sum.add(s);
    MeanVar out;
    out.mean = sum.value() / double(samples.size());
    if (samples.size() >= 2) {
        CompensatedSum sq;
        for (double s : samples) {
            const double d = s - out.mean;
            sq.add(d * d);
        }
        out.variance = sq.value() / double(samples.size() - 1);
    }
    return out;
}

inline double clt_halfwidth(double variance, std::size_t m, double a) {
    if (m < 2) throw std::invalid_argument("clt_halfwidth: need M >= 2");
    if (!(a > 0.0)) throw std::invalid_argument("clt_halfwidth: need a > 0");
    if (variance < 0.0) throw std::invalid_argument("clt_halfwidth: negative variance");
    return a * std::sqrt(variance / double(m));
}

// half-width for the variance channel: CLT applied to the squared deviations
inline double variance_halfwidth(const std::vector<double>& samples, double a) {
    const auto mv = mc_mean_var(samples);
    if (!mv.variance) throw std::invalid_argument("variance_halfwidth: need M >= 2");
    std::vector<double> sq;
    sq.reserve(samples.size());
    for (double s : samples) sq.push_back((s - mv.mean) * (s - mv.mean));
    const auto mv_sq = mc_mean_var(sq);
    return clt_halfwidth(*mv_sq.variance, samples.size(), a);
}

struct Estimate {
    double value = 0.0;
    double half_width = 0.0;
    std::size_t M = 0;
    double a = 0.0;

    double confidence() const { return std::erf(a / std::sqrt(2.0)); }
};

inline Estimate estimate_mean(const std::vector<double>& samples, double a) {
    const auto mv = mc_mean_var(samples);
    Estimate e;
    e.value = mv.mean;
    e.M = samples.size();
    e.a = a;
    e.half_width = mv.variance ? clt_halfwidth(*mv.variance, samples.size(), a) : 0.0;
    return e;
}

inline Estimate estimate_variance(const std::vector<double>& samples, double a) {
    const auto mv = mc_mean_var(samples);
    if (!mv.variance) throw std::invalid_argument("estimate_variance: need M >= 2");
    Estimate e;
    e.value = *mv.variance;
    e.M = samples.size();
    e.a = a;
    e.half_width = variance_halfwidth(samples, a);
    return e;
}

// mean of the per-sample RB output bounds; certifies |E_M[s_h] - E_M[s_N]|
inline double mc_rb_expectation_bound(const std::vector<double>& delta_s) {
    if (delta_s.empty()) throw std::invalid_argument("mc_rb_expectation_bound: empty");
    CompensatedSum sum;
    for (double d : delta_s) {
        if (!(d >= 0.0))
            throw std::invalid_argument("mc_rb_expectation_bound: bounds must be >= 0");
        sum.add(d);
    }
    return sum.value() / double(delta_s.size());
}

// certifies |V_M[s_h] - V_M[s_N]|
inline double mc_rb_variance_bound(const std::vector<double>& s_n,
                                   const std::vector<double>& delta_s, double delta_e) {
    if (s_n.size() != delta_s.size())
        throw std::invalid_argument("mc_rb_variance_bound: size mismatch");
    if (s_n.size() < 2) throw std::invalid_argument("mc_rb_variance_bound: need M >= 2");
    if (!(delta_e >= 0.0))
        throw std::invalid_argument("mc_rb_variance_bound: delta_e must be >= 0");
    CompensatedSum sum;
    for (std::size_t m = 0; m < s_n.size(); ++m) {
        if (!(delta_s[m] >= 0.0))
            throw std::invalid_argument("mc_rb_variance_bound: bounds must be >= 0");
        sum.add((delta_s[m] + delta_e) * (delta_s[m] + 2.0 * std::abs(s_n[m])));
    }
    return sum.value() / double(s_n.size() - 1);
}

// composite bound on |E[s_h] - E_M[s_N]|: CLT part plus RB part; stagnates at
// delta_e as M grows
inline double mc_rb_total_bound(double v_m_sn, double delta_v, std::size_t m, double a,
                                double delta_e) {
    if (!(v_m_sn >= 0.0) || !(delta_v >= 0.0) || !(delta_e >= 0.0))
        throw std::invalid_argument("mc_rb_total_bound: components must be >= 0");
    return clt_halfwidth(v_m_sn + delta_v, m, a) + delta_e;
}

// gamma = Cov(X, Y) / V[Y]; the variance-optimal control-variate weight
inline std::optional<double> optimal_cv_gamma(const std::vector<double>& x,
                                              const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("optimal_cv_gamma: need paired samples, M >= 2");
    const auto mx = mc_mean_var(x), my = mc_mean_var(y);
    if (!(*my.variance > 0.0)) return std::nullopt;  // degenerate control variate
    CompensatedSum cov;
    for (std::size_t m = 0; m < x.size(); ++m)
        cov.add((x[m] - mx.mean) * (y[m] - my.mean));
    return cov.value() / double(x.size() - 1) / *my.variance;
}

// Welford accumulator for streaming use when storing samples is impractical.
class RunningStats {
public:
    void push(double x) {
        if (!std::isfinite(x)) throw std::invalid_argument("RunningStats: non-finite sample");
        ++n_;
        const long double d = x - mean_;
        mean_ += d / n_;
        m2_ += d * (x - mean_);
    }

    std::size_t count() const { return n_; }
    double mean() const {
        if (n_ < 1) throw std::logic_error("RunningStats: empty");
        return double(mean_);
    }
    std::optional<double> variance() const {
        if (n_ < 2) return std::nullopt;
        return double(m2_ / (long double)(n_ - 1));
    }

private:
    std::size_t n_ = 0;
    long double mean_ = 0.0L;
    long double m2_ = 0.0L;
};

}  // namespace mvr::mc
