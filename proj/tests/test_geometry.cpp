#include <doctest.h>

#include <random>

#include "conicflow/geodesic.hpp"
#include "conicflow/grid.hpp"
#include "conicflow/metric.hpp"
#include "oracles.hpp"

using namespace conicflow;

namespace {

constexpr double kPi = 3.141592653589793;

Divisor reference_three() {
    return Divisor({Weight(0.5), Weight(0.5), Weight(0.5)}, {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{-0.5, -0.8, 0.1}});
}

Field random_field(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Field f(n);
    for (auto& v : f) v = nd(rng);
    return f;
}

double bump(double t, double p) { return 0.3 * std::sin(t) * std::cos(p) + 0.2 * std::cos(t) * std::cos(t); }

}  // namespace

TEST_CASE("grid weights are exact cell areas") {
    for (auto [nl, nm] : {std::pair{16, 32}, std::pair{64, 128}, std::pair{33, 70}}) {
        auto g = build_grid(nl, nm, Divisor());
        double s = 0.0;
        for (double w : g->weights()) s += w;
        CHECK(s == doctest::Approx(2.0).epsilon(1e-13));
    }
    auto ax = build_axisymmetric_grid(100, Divisor());
    double s = 0.0;
    for (double w : ax->weights()) s += w;
    CHECK(s == doctest::Approx(2.0).epsilon(1e-13));
    CHECK_THROWS_AS(build_grid(8, 16, Divisor()), GridError);
    CHECK_THROWS_AS(build_axisymmetric_grid(64, reference_three()), GridError);
}

TEST_CASE("round Laplacian is self-adjoint with constant kernel") {
    auto g = build_grid(32, 64, Divisor());
    auto f = random_field(g->size(), 1), h = random_field(g->size(), 2);
    auto lf = round_laplacian(*g, f), lh = round_laplacian(*g, h);
    double a = 0.0, b = 0.0;
    for (int i = 0; i < g->size(); ++i) a += lf[i] * h[i] * g->weight(i), b += f[i] * lh[i] * g->weight(i);
    CHECK(std::abs(a - b) < 1e-10 * (1.0 + std::abs(a)));
    CHECK(std::abs(a + dirichlet_pairing(*g, f, h)) < 1e-10 * (1.0 + std::abs(a)));
    auto lc = round_laplacian(*g, Field(g->size(), 3.7));
    for (double v : lc) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("Poisson solver inverts the Laplacian up to the mean") {
    auto g = build_grid(24, 48, Divisor());
    auto rhs = random_field(g->size(), 3);
    auto res = g->poisson().solve(rhs);
    auto back = round_laplacian(*g, res.f);
    double mean = 0.0;
    for (int i = 0; i < g->size(); ++i) mean += res.f[i] * g->weight(i);
    CHECK(std::abs(mean) < 1e-10);
    for (int i = 0; i < g->size(); ++i) CHECK(back[i] == doctest::Approx(rhs[i] - res.mean_correction).epsilon(1e-8));
}

TEST_CASE("round sphere has area 2 and curvature 1") {
    auto g = build_grid(64, 128, Divisor());
    auto m = initial_state(background_metric(g, 0.1));
    CHECK(area(m) == doctest::Approx(2.0).epsilon(1e-12));
    for (double r : scalar_curvature(m)) CHECK(std::abs(r - 1.0) < 1e-3);
    CHECK(unit_constants().curvature_scale == doctest::Approx(1.0 / (2.0 * kPi)));
}

TEST_CASE("conformal curvature converges to the Brioschi value") {
    double prev = 1e9;
    for (int n : {16, 32, 64}) {
        auto g = build_grid(n, 2 * n, Divisor());
        auto m = initial_state(background_metric(g, 0.2));
        for (int a = 0; a < g->size(); ++a) m.u[a] = 2.0 * bump(g->theta_of(a), g->phi_of(a));
        auto R = scalar_curvature(m);
        double err = 0.0;
        for (int a = 0; a < g->size(); ++a) {
            double th = g->theta_of(a);
            if (th < 0.3 || th > kPi - 0.3) continue;
            double K = oracle::brioschi(bump, th, g->phi_of(a));
            err = std::max(err, std::abs(R[a] - K));  // R = K on the unit-sphere scale
        }
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 2e-2);
}

TEST_CASE("integration by parts on a conformal metric") {
    auto g = build_grid(32, 64, reference_three());
    auto m = initial_state(background_metric(g, 0.1));
    for (int a = 0; a < g->size(); ++a) m.u[a] = bump(g->theta_of(a), g->phi_of(a));
    renormalize(m);
    CHECK(area(m) == doctest::Approx(2.0).epsilon(1e-12));
    auto f = random_field(g->size(), 4), h = random_field(g->size(), 5);
    auto lf = laplacian(f, m);
    Field prod(g->size());
    for (int a = 0; a < g->size(); ++a) prod[a] = lf[a] * h[a];
    CHECK(std::abs(integrate(prod, m) + dirichlet_pairing(*g, f, h)) < 1e-10);
    CHECK(integrate(gradient_sq(f, m), m) == doctest::Approx(dirichlet_energy(*g, f)).epsilon(1e-12));
}

TEST_CASE("Gauss-Bonnet for the smoothed conical background") {
    auto g = build_grid(64, 128, reference_three());
    auto m = initial_state(background_metric(g, 0.1));
    CHECK(integrate(scalar_curvature(m), m) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(integrate(regular_curvature(m), m) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("epsilon guard rejects unresolved cores") {
    auto g = build_grid(64, 128, reference_three());
    CHECK_THROWS_AS(background_metric(g, 0.5 * g->dtheta()), MetricError);
    CHECK_NOTHROW(background_metric(g, g->dtheta()));
    CHECK_THROWS_AS(background_metric(g, 0.0), MetricError);
}

TEST_CASE("cone mass concentrates at the marked point") {
    // Curvature inside a fixed section-norm ball, Richardson-extrapolated in epsilon (kernel tail ~ eps^2).
    auto g = build_grid(128, 256, reference_three());
    auto mass = [&](double eps, const Vec3& p) {
        auto m = initial_state(background_metric(g, eps));
        auto R = scalar_curvature(m);
        double s = 0.0;
        for (int a = 0; a < g->size(); ++a)
            if (std::sqrt(std::max(0.0, 0.5 * (1.0 - dot(g->xyz(a), p)))) < 0.1) s += R[a] * g->weight(a) * m.density(a);
        return s;
    };
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& p = g->placed_divisor().position(j);
        double coarse = mass(0.05, p), fine = mass(0.025, p);
        CHECK(fine > coarse);
        double limit = (4.0 * fine - coarse) / 3.0;
        CHECK(std::abs(limit - 0.5) < 0.05);
    }
}

TEST_CASE("graph distances on the round sphere") {
    auto g = build_grid(64, 128, Divisor());
    auto m = initial_state(background_metric(g, 0.1));
    const double radius = 1.0 / std::sqrt(2.0 * kPi);
    double d = geodesic_distance(m, {0, 0, 1}, {0, 0, -1});
    CHECK(d >= kPi * radius * (1.0 - 1e-3));
    CHECK(d < kPi * radius * 1.03);
    // Scaling the metric by e^c scales distances by e^{c/2}.
    auto big = m;
    for (auto& v : big.u) v += 0.6;
    CHECK(geodesic_distance(big, {0, 0, 1}, {0, 0, -1}) == doctest::Approx(d * std::exp(0.3)).epsilon(1e-12));
    double diam = diameter_estimate(m);
    CHECK(diam == doctest::Approx(kPi * radius).epsilon(0.05));
    // Ball of radius r: round cap area 2 * (1 - cos(r / radius)) / 2.
    double r = 0.5 * kPi * radius;
    CHECK(ball_volume(m, {0, 0, 1}, r) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("distance field is symmetric and satisfies the triangle inequality") {
    auto g = build_grid(32, 64, Divisor());
    auto m = initial_state(background_metric(g, 0.2));
    for (int a = 0; a < g->size(); ++a) m.u[a] = bump(g->theta_of(a), g->phi_of(a));
    DistanceField fa(m, 5), fb(m, 700), fc(m, 1500);
    CHECK(fa.at_node(700) == doctest::Approx(fb.at_node(5)).epsilon(1e-12));
    CHECK(fa.at_node(1500) <= fa.at_node(700) + fb.at_node(1500) + 1e-12);
    CHECK(fa.at_node(5) == 0.0);
}
