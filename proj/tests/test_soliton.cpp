#include <doctest.h>

#include <random>

#include "conicflow/divisor.hpp"
#include "conicflow/soliton.hpp"
#include "oracles.hpp"

using namespace conicflow;

namespace {

// Frozen from oracle::soliton_w (Simpson quadrature and bisection on the quadrature tau).
constexpr double kW_08_03 = -0.0337309125;
constexpr double kW_09_02 = -1.3946972350;

Divisor three(double a, double b, double c) {
    return Divisor({Weight(a), Weight(b), Weight(c)}, {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{0, 1, 0}});
}

}  // namespace

TEST_CASE("tau_of_c against quadrature") {
    for (double c : {-7.0, -1.0, -1e-3, 1e-5, 0.5, 1.0, 2.5, 12.0})
        CHECK(tau_of_c(c) == doctest::Approx(oracle::tau(c, 20000)).epsilon(1e-10));
    CHECK(tau_of_c(0.0) == 0.0);
}

TEST_CASE("tau_of_c is odd, increasing and bounded") {
    double prev = -1.0;
    for (int i = -4000; i <= 4000; ++i) {
        double c = i * 0.01;
        double t = tau_of_c(c);
        CHECK(t > prev);
        CHECK(std::abs(t) < 1.0);
        CHECK(tau_of_c(-c) == -t);
        prev = t;
    }
}

TEST_CASE("solve_c inverts tau_of_c") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ut(-0.999, 0.999);
    for (int i = 0; i < 2000; ++i) {
        double t = ut(rng);
        CHECK(std::abs(tau_of_c(solve_c(t)) - t) < 1e-12);
        CHECK(solve_c(-t) == -solve_c(t));
    }
    CHECK_THROWS(solve_c(1.0));
    CHECK_THROWS(solve_c(-1.5));
}

TEST_CASE("f_of_c against quadrature") {
    for (double c : {0.3, 1.0, 2.11, 6.0})
        CHECK(f_of_c(c) == doctest::Approx(oracle::entropy(c)).epsilon(1e-9));
    CHECK(f_of_c(0.0) == 0.0);
    CHECK(f_of_c(1e-4) == doctest::Approx(1e-8 / 3.0).epsilon(1e-6));
    double prev = 0.0;
    for (int i = 1; i < 2000; ++i) {
        double c = i * 0.01;
        CHECK(f_of_c(c) > prev);
        CHECK(f_of_c(-c) == f_of_c(c));
        prev = f_of_c(c);
    }
}

TEST_CASE("soliton W frozen values") {
    CHECK(std::abs(soliton_w(0.8, 0.3) - kW_08_03) < 1e-9);
    CHECK(std::abs(soliton_w(0.9, 0.2) - kW_09_02) < 1e-9);
    CHECK(std::abs(oracle::soliton_w(0.8, 0.3) - kW_08_03) < 1e-9);
    CHECK(soliton_w(0.4, 0.4) == 1.0);
    auto s = make_soliton_spec(0.8, 0.3);
    CHECK(s.tau == doctest::Approx(0.5 / 0.9));
    CHECK(s.c == doctest::Approx(2.11).epsilon(2e-3));
}

TEST_CASE("soliton W is below one and equals one only on the diagonal") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ub(0.01, 0.99);
    for (int i = 0; i < 500; ++i) {
        double a = ub(rng), b = ub(rng);
        if (a == b) continue;
        CHECK(soliton_w(std::max(a, b), std::min(a, b)) < 1.0);
    }
}

TEST_CASE("mu table for the unstable reference divisor") {
    auto t = mu_table(three(0.1, 0.2, 0.8));
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].side_p == std::vector<std::size_t>{2});
    CHECK(t.rows[0].w == doctest::Approx(soliton_w(0.8, 0.3)));
    CHECK(t.rows[1].side_p == std::vector<std::size_t>{0, 2});
    CHECK(std::abs(t.rows[1].w - kW_09_02) < 1e-9);
    REQUIRE(t.threshold);
    CHECK(*t.threshold == t.rows[1].w);
    CHECK(t.top_is_heaviest_alone);
    CHECK(t.excluded.size() == 2);
    CHECK(mu_table(three(0.5, 0.5, 0.5)).warnings.size() >= 1);
}

TEST_CASE("profile solves the curvature ODE by shooting") {
    // P'' = -(lambda + c P') with P(1) = 0; shoot on P'(1) so that P(-1) = 0.
    for (auto [bp, bq] : {std::pair{0.8, 0.3}, std::pair{0.5, 0.5}, std::pair{0.6, 0.1}}) {
        auto prof = soliton_profile(bp, bq);
        auto shoot = [&](double slope) {
            double P = 0.0, dP = slope, x = 1.0;
            const int n = 4000;
            const double h = -2.0 / n;
            auto acc = [&](double q) { return -(prof.lambda + prof.c * q); };
            for (int i = 0; i < n; ++i) {
                double k1p = dP, k1q = acc(dP);
                double k2p = dP + h / 2 * k1q, k2q = acc(dP + h / 2 * k1q);
                double k3p = dP + h / 2 * k2q, k3q = acc(dP + h / 2 * k2q);
                double k4p = dP + h * k3q, k4q = acc(dP + h * k3q);
                P += h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6;
                dP += h * (k1q + 2 * k2q + 2 * k3q + k4q) / 6;
                x += h;
            }
            return std::pair{P, dP};
        };
        double lo = -5.0, hi = 0.0;
        for (int i = 0; i < 100; ++i) {
            double mid = 0.5 * (lo + hi);
            (shoot(mid).first > 0.0 ? lo : hi) = mid;
        }
        double s = 0.5 * (lo + hi);
        CHECK(1.0 - std::abs(s) == doctest::Approx(bp).epsilon(1e-8));
        CHECK(1.0 - std::abs(shoot(s).second) == doctest::Approx(bq).epsilon(1e-8));
        CHECK(prof.dP(1.0) == doctest::Approx(s).epsilon(1e-8));
        CHECK(prof.P(0.3) > 0.0);
        CHECK(profile_total_curvature(prof) == doctest::Approx(2.0 - bp - bq).epsilon(1e-8));
    }
}

TEST_CASE("profile quadrature reproduces the closed-form W") {
    for (double bq : {0.05, 0.2, 0.35}) {
        auto p = soliton_profile(0.7, bq);
        CHECK(std::abs(profile_normalized_w(p) - soliton_w(0.7, bq)) < 1e-8);
    }
    CHECK(profile_normalized_w(football(0.4)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("profile embedding density") {
    auto p = football(0.0);
    ProfileEmbedding emb(p);
    // The round sphere has unit density everywhere.
    for (double a : {0.1, 0.7, 1.5, 2.9}) CHECK(emb.density_at(a) == doctest::Approx(1.0).epsilon(1e-6));
    ProfileEmbedding cone(football(0.5));
    CHECK(cone.moment_at(1e-3) > 0.99);
    CHECK(cone.moment_at(3.14) < -0.99);
}

TEST_CASE("W decreases with asymmetry at fixed weight sum") {
    double prev = 2.0;
    for (int i = 0; i < 50; ++i) {
        double a = 0.85 * i / 49.0;
        double w = soliton_w(0.5 * (1.1 + a), 0.5 * (1.1 - a));
        CHECK(w < prev);
        prev = w;
    }
}

TEST_CASE("equal weights give the football profile") {
    auto s = soliton_profile(0.35, 0.35), f = football(0.35);
    CHECK(s.c == 0.0);
    for (double x = -1.0; x <= 1.0; x += 0.01) {
        CHECK(std::abs(s.P(x) - f.P(x)) < 1e-10);
        CHECK(std::abs(s.curvature(x) - 0.65) < 1e-10);
    }
}
