#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvr/rng.hpp"

namespace mvr {

using ParameterVector = Eigen::VectorXd;

enum class MarginalDensity { Uniform };

// Parameter box Lambda = prod_q [lo_q, hi_q] with per-coordinate densities.
struct ParameterDomain {
    struct Interval {
        double lo;
        double hi;
    };
    std::vector<Interval> bounds;
    std::vector<MarginalDensity> densities;

    static ParameterDomain uniform_box(int q, double lo, double hi) {
        if (q < 1) throw std::invalid_argument("ParameterDomain: Q must be >= 1");
        // lo == hi is allowed as a degenerate (deterministic) coordinate
        if (lo > hi) throw std::invalid_argument("ParameterDomain: empty interval");
        ParameterDomain d;
        d.bounds.assign(std::size_t(q), {lo, hi});
        d.densities.assign(std::size_t(q), MarginalDensity::Uniform);
        return d;
    }

    int dim() const { return int(bounds.size()); }

    bool contains(const ParameterVector& y, double tol = 0.0) const {
        if (y.size() != dim()) return false;
        for (int q = 0; q < dim(); ++q)
            if (y[q] < bounds[std::size_t(q)].lo - tol || y[q] > bounds[std::size_t(q)].hi + tol)
                return false;
        return true;
    }
};

inline ParameterVector draw_one(SampleStream& stream, const ParameterDomain& domain) {
    ParameterVector y(domain.dim());
    for (int q = 0; q < domain.dim(); ++q) {
        const auto& b = domain.bounds[std::size_t(q)];
        y[q] = b.lo + (b.hi - b.lo) * stream.next_double();
    }
    return y;
}

inline std::vector<ParameterVector> draw_samples(SampleStream& stream,
                                                 const ParameterDomain& domain,
                                                 std::size_t m) {
    if (m < 1) throw std::invalid_argument("draw_samples: m must be >= 1");
    std::vector<ParameterVector> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(draw_one(stream, domain));
    return out;
}

// kappa(x, y) = mean(x) + sum_q modes_q(x) y_q. Both calls take a point x in [0,1].
struct RandomFieldExpansion {
    std::function<double(double)> mean;
    std::vector<std::function<double(double)>> modes;

    // Piecewise-constant field of the heat benchmark: mean 0 and
    // modes_q = indicator of the q-th of Q equal subdomains.
    static RandomFieldExpansion benchmark_piecewise(int q_count) {
        RandomFieldExpansion f;
        f.mean = [](double) { return 0.0; };
        for (int q = 0; q < q_count; ++q) {
            const double lo = double(q) / q_count, hi = double(q + 1) / q_count;
            f.modes.push_back([lo, hi](double x) { return (x >= lo && x < hi) || (hi == 1.0 && x == 1.0) ? 1.0 : 0.0; });
        }
        return f;
    }

    int num_modes() const { return int(modes.size()); }

    double evaluate(double x, const ParameterVector& y) const {
        double v = mean(x);
        for (int q = 0; q < num_modes(); ++q) v += modes[std::size_t(q)](x) * y[q];
        return v;
    }

    // Check 0 < kappa on a probe grid over all parameter-bound corner values.
    // With Q independent coordinates the per-point extrema are attained
    // coordinate-wise, so corners reduce to one min-check per probe point.
    bool positive_on(const ParameterDomain& domain,
                     const std::vector<double>& probe_points) const {
        for (double x : probe_points) {
            double v = mean(x);
            for (int q = 0; q < num_modes(); ++q) {
                const double psi = modes[std::size_t(q)](x);
                const auto& b = domain.bounds[std::size_t(q)];
                v += psi >= 0.0 ? psi * b.lo : psi * b.hi;  // worst-case corner
            }
            if (!(v > 0.0)) return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Closed-form 1D heat benchmark: -(kappa u_x)_x = 1 on (0,1), u(0)=0,
// kappa u_x(1)=0, kappa piecewise constant (value y_q) on Q equal subdomains.
// ---------------------------------------------------------------------------

inline void require_positive_coefficients(const ParameterVector& y) {
    for (int q = 0; q < y.size(); ++q)
        if (!(y[q] > 0.0))
            throw std::domain_error("benchmark: coefficient y_" + std::to_string(q + 1) +
                                    " must be positive");
}

// u(x, y) = int_0^x (1-z)/kappa(z) dz evaluated exactly.
inline double analytic_solution_1d(const ParameterVector& y, double x) {
    require_positive_coefficients(y);
    const int q_count = int(y.size());
    double u = 0.0;
    for (int q = 0; q < q_count; ++q) {
        const double a = double(q) / q_count;
        const double b = std::min(double(q + 1) / q_count, x);
        if (b <= a) break;
        // int_a^b (1-z) dz = (b-a) - (b^2-a^2)/2
        u += ((b - a) - 0.5 * (b * b - a * a)) / y[q];
    }
    return u;
}

// Coefficients c_q with s(y) = sum_q c_q / y_q, c_q = [(1-(q-1)/Q)^3 - (1-q/Q)^3]/3.
// Evaluated from integer cubes over the common denominator 3 Q^3 so the oracle
// carries no accumulated quadrature error.
inline std::vector<double> benchmark_output_coefficients(int q_count) {
    std::vector<double> c(static_cast<std::size_t>(q_count));
    const double denom = 3.0 * double(q_count) * double(q_count) * double(q_count);
    for (int q = 1; q <= q_count; ++q) {
        const double a = double(q_count - q + 1);  // Q - (q-1)
        const double b = double(q_count - q);
        c[std::size_t(q) - 1] = (a * a * a - b * b * b) / denom;
    }
    return c;
}

// s(y) = int_0^1 u(x, y) dx = sum_q c_q / y_q.
inline double analytic_output_1d(const ParameterVector& y) {
    require_positive_coefficients(y);
    const auto c = benchmark_output_coefficients(int(y.size()));
    double s = 0.0;
    for (int q = 0; q < y.size(); ++q) s += c[std::size_t(q)] / y[q];
    return s;
}

struct BenchmarkMoments {
    double mean;
    double variance;
};

// E[s] and V[s] for i.i.d. uniform marginals on [lo, hi], hi > lo > 0.
// E[1/y] = ln(hi/lo)/(hi-lo), E[1/y^2] = 1/(lo*hi).
inline BenchmarkMoments analytic_moments_1d(const ParameterDomain& domain) {
    const int q_count = domain.dim();
    double lo = domain.bounds[0].lo, hi = domain.bounds[0].hi;
    for (const auto& b : domain.bounds)
        if (b.lo != lo || b.hi != hi)
            throw std::invalid_argument("analytic_moments_1d: marginals must be identical");
    for (auto d : domain.densities)
        if (d != MarginalDensity::Uniform)
            throw std::invalid_argument("analytic_moments_1d: uniform marginals only");
    if (!(lo > 0.0)) throw std::invalid_argument("analytic_moments_1d: need lo > 0");

    const auto c = benchmark_output_coefficients(q_count);
    double sum_c = 0.0, sum_c2 = 0.0;
    for (double cq : c) {
        sum_c += cq;
        sum_c2 += cq * cq;
    }
    if (hi == lo) return {sum_c / lo, 0.0};  // degenerate deterministic parameter

    const double inv_mean = std::log(hi / lo) / (hi - lo);
    const double inv_sq_mean = 1.0 / (lo * hi);
    const double inv_var = inv_sq_mean - inv_mean * inv_mean;
    return {sum_c * inv_mean, sum_c2 * inv_var};
}

}  // namespace mvr
