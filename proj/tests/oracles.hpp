#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "conicflow/divisor.hpp"

/// Reference computations written independently of the library, used to freeze expected values.
namespace oracle {

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Mean of x under the density e^{cx} on [-1, 1].
inline double tau(double c, int n = 1000000) {
    double z = simpson([c](double x) { return std::exp(c * x); }, -1.0, 1.0, n);
    double m = simpson([c](double x) { return x * std::exp(c * x); }, -1.0, 1.0, n);
    return m / z;
}

/// Root of tau(c) = t by plain bisection.
inline double c_of_tau(double t, int n = 20000) {
    double lo = -60.0, hi = 60.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (tau(mid, n) < t ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// int theta e^theta dx over [-1, 1] with theta = c x + const and int e^theta dx = 2.
inline double entropy(double c, int n = 20000) {
    double z = simpson([c](double x) { return std::exp(c * x); }, -1.0, 1.0, n);
    double k = std::log(2.0 / z);
    return simpson([c, k](double x) { return (c * x + k) * std::exp(c * x + k); }, -1.0, 1.0, n);
}

/// Normalized W of the two-cone soliton from quadrature alone.
inline double soliton_w(double beta_p, double beta_q) {
    double t = (beta_p - beta_q) / (2.0 - beta_p - beta_q);
    return 1.0 - entropy(c_of_tau(t));
}

/// Every split of {0..k-1} into an unordered pair of sides, by brute force over all 2^k masks.
struct Split {
    std::vector<std::size_t> heavy, light;
    double beta_heavy = 0.0, beta_light = 0.0;
};
inline std::vector<Split> all_splits(const std::vector<double>& w) {
    const std::size_t k = w.size();
    std::vector<Split> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
        // Count each unordered split once: the side holding index k-1 is the one in the mask.
        if (!(mask & (std::size_t{1} << (k - 1)))) continue;
        Split s;
        std::vector<std::size_t> a, b;
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (mask & (std::size_t{1} << i)) a.push_back(i), sa += w[i];
            else b.push_back(i), sb += w[i];
        }
        if (sa >= sb) s.heavy = a, s.light = b, s.beta_heavy = sa, s.beta_light = sb;
        else s.heavy = b, s.light = a, s.beta_heavy = sb, s.beta_light = sa;
        out.push_back(s);
    }
    return out;
}

/// Gauss curvature of e^{2w} g_round (unit sphere) from the Brioschi formula with
/// E = e^{2w}, G = e^{2w} sin^2 theta, F = 0, derivatives by central differences.
inline double brioschi(const std::function<double(double, double)>& w, double th, double ph, double h = 1e-4) {
    auto E = [&](double t, double p) { return std::exp(2.0 * w(t, p)); };
    auto G = [&](double t, double p) { return std::exp(2.0 * w(t, p)) * std::sin(t) * std::sin(t); };
    auto root = [&](double t, double p) { return std::sqrt(E(t, p) * G(t, p)); };
    auto Gt_over = [&](double t, double p) {
        return (G(t + h, p) - G(t - h, p)) / (2 * h) / root(t, p);
    };
    auto Ep_over = [&](double t, double p) {
        return (E(t, p + h) - E(t, p - h)) / (2 * h) / root(t, p);
    };
    double d1 = (Gt_over(th + h, ph) - Gt_over(th - h, ph)) / (2 * h);
    double d2 = (Ep_over(th, ph + h) - Ep_over(th, ph - h)) / (2 * h);
    return -(d1 + d2) / (2.0 * root(th, ph));
}

/// Classical RK4 for a scalar ODE y' = f(t, y).
inline double rk4(const std::function<double(double, double)>& f, double y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    double t = t0;
    for (int i = 0; i < steps; ++i) {
        double k1 = f(t, y), k2 = f(t + h / 2, y + h * k1 / 2), k3 = f(t + h / 2, y + h * k2 / 2),
               k4 = f(t + h, y + h * k3);
        y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
        t += h;
    }
    return y;
}

}  // namespace oracle
