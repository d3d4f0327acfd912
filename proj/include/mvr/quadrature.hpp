#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mvr {

struct QuadratureRule {
    std::vector<double> points;   // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule with n points, exact for degree 2n-1.
inline QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    QuadratureRule rule;
    rule.points.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Chebyshev initial guess, then Newton on P_n
        double x = std::cos(M_PI * (double(i) + 0.75) / (double(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / double(k);
                p0 = p1;
                p1 = p2;
            }
            dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.points[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

// Legendre polynomial values P_0..P_p at x in [-1, 1].
inline void legendre_values(int p, double x, double* out) {
    out[0] = 1.0;
    if (p >= 1) out[1] = x;
    for (int k = 2; k <= p; ++k)
        out[k] = ((2.0 * k - 1.0) * x * out[k - 1] - (k - 1.0) * out[k - 2]) / double(k);
}

// Derivatives P_0'..P_p' at x in [-1, 1].
inline void legendre_derivatives(int p, double x, double* out) {
    std::vector<double> v(std::size_t(p) + 1);
    legendre_values(p, x, v.data());
    out[0] = 0.0;
    for (int k = 1; k <= p; ++k)
        out[k] = k * v[std::size_t(k) - 1] + x * out[k - 1];
}

}  // namespace mvr
