#include "conicflow/soliton.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

namespace conicflow {

namespace {

constexpr double kSeriesThreshold = 1e-4;

/// log(sinh(c)/c) for c >= 0 without overflow or cancellation.
double log_sinhc_over_c(double c) {
    c = std::abs(c);
    if (c < 1e-3) {
        double c2 = c * c;
        return c2 / 6.0 - c2 * c2 / 180.0 + c2 * c2 * c2 / 2835.0;
    }
    if (c < 20.0) return std::log(std::sinh(c) / c);
    return c + std::log1p(-std::exp(-2.0 * c)) - std::log(2.0) - std::log(c);
}

double integrate_unit_interval(const std::function<double(double)>& f) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 20, 1e-15, &err);
}

void check_pair(double beta_p, double beta_q) {
    if (!(beta_q >= 0.0) || !(beta_p < 1.0) || beta_q > beta_p)
        throw std::invalid_argument("soliton weights need 0 <= beta_q <= beta_p < 1");
}

}  // namespace

double tau_of_c(double c) {
    if (std::abs(c) < kSeriesThreshold) {
        double c2 = c * c;
        return c / 3.0 - c * c2 / 45.0 + 2.0 * c * c2 * c2 / 945.0;
    }
    return 1.0 / std::tanh(c) - 1.0 / c;
}

double solve_c(double tau) {
    if (!(std::abs(tau) < 1.0)) throw std::domain_error("solve_c needs |tau| < 1");
    if (tau == 0.0) return 0.0;
    if (tau < 0.0) return -solve_c(-tau);
    if (tau < 1e-13) return 3.0 * tau;
    double hi = 2.0 / (1.0 - tau) + 1.0;
    auto g = [tau](double c) { return tau_of_c(c) - tau; };
    std::uintmax_t iters = 200;
    auto bracket = boost::math::tools::toms748_solve(g, 0.0, hi, -tau, g(hi),
                                                     boost::math::tools::eps_tolerance<double>(53), iters);
    double c = 0.5 * (bracket.first + bracket.second);
    // Newton polish: tau'(c) = 1/c^2 - 1/sinh^2(c) > 0.
    for (int i = 0; i < 2; ++i) {
        double d = c < 1e-3 ? 1.0 / 3.0 - c * c / 15.0
                            : 1.0 / (c * c) - 1.0 / (std::sinh(c) * std::sinh(c));
        if (!(d > 0.0) || !std::isfinite(d)) break;
        double next = c - g(c) / d;
        if (std::abs(g(next)) < std::abs(g(c))) c = next;
    }
    return c;
}

double f_of_c(double c) {
    c = std::abs(c);
    if (c < 1e-3) {
        double c2 = c * c;
        return c2 / 3.0 - c2 * c2 / 30.0 + 2.0 * c2 * c2 * c2 / 567.0;
    }
    return 2.0 * (c / std::tanh(c) - 1.0 - log_sinhc_over_c(c));
}

SolitonSpec make_soliton_spec(double beta_p, double beta_q) {
    check_pair(beta_p, beta_q);
    SolitonSpec s;
    s.beta_p = beta_p;
    s.beta_q = beta_q;
    s.tau = beta_p == beta_q ? 0.0 : (beta_p - beta_q) / (2.0 - beta_p - beta_q);
    s.c = solve_c(s.tau);
    s.w = 1.0 - f_of_c(s.c);
    return s;
}

double soliton_w(double beta_p, double beta_q) { return make_soliton_spec(beta_p, beta_q).w; }

MuTable mu_table(const Divisor& d) {
    MuTable t;
    if (d.empty()) throw std::invalid_argument("mu table needs at least one marked point");
    if (classify_stability(d) != StabilityClass::Unstable) t.warnings.push_back("divisor not unstable");
    for (auto& ld : enumerate_partitions(d)) {
        if (!ld.valid) {
            t.excluded.push_back(ld);
            continue;
        }
        SolitonSpec s = make_soliton_spec(ld.beta_p, ld.beta_q);
        s.side_p = ld.side_p;
        s.side_q = ld.side_q;
        t.rows.push_back(std::move(s));
    }
    std::stable_sort(t.rows.begin(), t.rows.end(),
                     [](const SolitonSpec& a, const SolitonSpec& b) { return a.w > b.w; });
    if (t.rows.size() >= 2) t.threshold = t.rows[1].w;
    else t.warnings.push_back("threshold undefined: fewer than two valid partitions");
    if (!t.rows.empty()) {
        const auto& top = t.rows.front();
        t.top_is_heaviest_alone = top.side_p.size() == 1 && top.side_p[0] == d.k() - 1;
        if (!t.top_is_heaviest_alone) t.warnings.push_back("largest W is not attained by I = {k}");
    }
    return t;
}

double RadialProfile::P(double xx) const {
    if (c < kSeriesThreshold) {
        double q = xx * xx - 1.0;
        return lambda * (-0.5 * q + c * (xx * q) / 6.0 - c * c * q * q / 24.0);
    }
    return (lambda / c) * ((1.0 - xx) + std::exp(-c * xx) * std::expm1(-c * (1.0 - xx)) / std::sinh(c));
}

double RadialProfile::dP(double xx) const {
    if (c < kSeriesThreshold) {
        return lambda * (-xx + c * (3.0 * xx * xx - 1.0) / 6.0 - c * c * xx * (xx * xx - 1.0) / 6.0);
    }
    return lambda * (std::exp(-c * xx) / std::sinh(c) - 1.0 / c);
}

double RadialProfile::potential(double xx) const { return c * xx - log_sinhc_over_c(c); }

double profile_normalized_w(const RadialProfile& p) {
    const double chi = 2.0 * p.lambda;
    return integrate_unit_interval([&](double x) {
        double th = p.potential(x);
        return ((p.curvature(x) + p.c * p.c * p.P(x)) / chi - th) * std::exp(th);
    });
}

double profile_theta_entropy(const RadialProfile& p) {
    return integrate_unit_interval([&](double x) {
        double th = p.potential(x);
        return th * std::exp(th);
    });
}

double profile_total_curvature(const RadialProfile& p) {
    return integrate_unit_interval([&](double x) { return p.curvature(x); });
}

RadialProfile soliton_profile(double beta_p, double beta_q, int n) {
    if (n < 64) throw std::invalid_argument("soliton profile needs at least 64 samples");
    SolitonSpec s = make_soliton_spec(beta_p, beta_q);
    RadialProfile p;
    p.beta_plus = beta_p;
    p.beta_minus = beta_q;
    p.c = s.c;
    p.lambda = 1.0 - 0.5 * (beta_p + beta_q);
    for (int i = 0; i < n; ++i) {
        double x = -1.0 + 2.0 * i / (n - 1);
        p.x.push_back(x);
        p.phi.push_back(std::max(0.0, p.P(x)));
        p.R.push_back(p.curvature(x));
        p.theta.push_back(p.potential(x));
    }
    p.phi.front() = 0.0;
    p.phi.back() = 0.0;

    double slope_plus = 1.0 + p.dP(1.0);
    double slope_minus = 1.0 - p.dP(-1.0);
    if (std::abs(slope_plus - beta_p) > 1e-9 || std::abs(slope_minus - beta_q) > 1e-9 ||
        std::abs(p.P(1.0)) > 1e-12 || std::abs(p.P(-1.0)) > 1e-12)
        throw std::runtime_error("soliton profile boundary mismatch");
    if (std::abs(profile_theta_entropy(p) - f_of_c(p.c)) > 1e-8)
        throw std::runtime_error("soliton profile entropy does not reproduce the closed form");
    return p;
}

RadialProfile football(double beta, int n) {
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("football weight must lie in [0,1)");
    return soliton_profile(beta, beta, n);
}

ProfileEmbedding::ProfileEmbedding(const RadialProfile& p, double x_equator) : profile_(p) {
    // dx/ds = -2 P(x), s = log tan(angle/2); integrate outward from s = 0 with RK4.
    const double s_max = 30.0;
    ds_ = 1e-3;
    const int half = static_cast<int>(s_max / ds_);
    s_min_ = -half * ds_;
    table_.assign(2 * half + 1, 0.0);
    table_[half] = x_equator;
    for (int i = half + 1; i <= 2 * half; ++i) table_[i] = advance(table_[i - 1], ds_);
    for (int i = half - 1; i >= 0; --i) table_[i] = advance(table_[i + 1], -ds_);
}

double ProfileEmbedding::advance(double x, double h) const {
    auto rhs = [&](double y) { return -2.0 * profile_.P(std::clamp(y, -1.0, 1.0)); };
    double k1 = rhs(x), k2 = rhs(x + 0.5 * h * k1), k3 = rhs(x + 0.5 * h * k2), k4 = rhs(x + h * k3);
    return std::clamp(x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, -1.0, 1.0);
}

double ProfileEmbedding::moment_at(double angle) const {
    double s = std::log(std::tan(0.5 * angle));
    double pos = (s - s_min_) / ds_;
    if (pos <= 0.0) return table_.front();
    if (pos >= table_.size() - 1) return table_.back();
    // Linear interpolation would put kinks into x(s) that the Laplacian amplifies on fine grids.
    auto i = static_cast<std::size_t>(std::lround(pos));
    return advance(table_[i], s - (s_min_ + i * ds_));
}

double ProfileEmbedding::density_at(double angle) const {
    double sn = std::sin(angle);
    return 2.0 * profile_.P(moment_at(angle)) / (sn * sn);
}

}  // namespace conicflow
