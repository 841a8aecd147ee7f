#include "conicflow/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace conicflow {

namespace {

constexpr double kPi = std::numbers::pi;

/// Gauss curvature of e^{u} (dtheta^2 + sin^2 theta dphi^2) / (2 pi) by Brioschi's formula for an
/// orthogonal metric, with all derivatives taken by central differences of the analytic u.
template <class U>
double brioschi_curvature(const U& u, double th, double ph) {
    const double h = 1e-4;
    auto E = [&](double t, double p) { return std::exp(u(t, p)) / (2.0 * kPi); };
    auto G = [&](double t, double p) { return std::exp(u(t, p)) * std::sin(t) * std::sin(t) / (2.0 * kPi); };
    auto root = [&](double t, double p) { return std::sqrt(E(t, p) * G(t, p)); };
    auto Gt_over = [&](double t, double p) { return (G(t + h, p) - G(t - h, p)) / (2 * h) / root(t, p); };
    auto Ep_over = [&](double t, double p) { return (E(t, p + h) - E(t, p - h)) / (2 * h) / root(t, p); };
    double d_theta = (Gt_over(th + h, ph) - Gt_over(th - h, ph)) / (2 * h);
    double d_phi = (Ep_over(th, ph + h) - Ep_over(th, ph - h)) / (2 * h);
    return -(d_theta + d_phi) / (2.0 * root(th, ph));
}

}  // namespace

UnitConstants calibrate_units() {
    UnitConstants uc;
    uc.round_radius = 1.0 / std::sqrt(2.0 * kPi);
    uc.curvature_scale = 1.0 / (2.0 * kPi);
    uc.laplacian_scale = 1.0 / (4.0 * kPi);
    uc.gradient_scale = 1.0 / (4.0 * kPi);

    auto grid = build_grid(32, 64, Divisor());
    auto bg = background_metric(grid, 0.1);
    MetricState round = initial_state(bg);

    // (i) area and (ii) round curvature.
    uc.total_area = area(round);
    auto R = scalar_curvature(round);
    for (double r : R) uc.round_curvature_error = std::max(uc.round_curvature_error, std::abs(r - 1.0));

    // (iii) conformal identity against the Brioschi formula.
    auto ufun = [](double t, double p) {
        return 0.3 * std::sin(t) * std::cos(p) + 0.2 * std::cos(t) * std::cos(t) - 0.1 * std::sin(t) * std::sin(p);
    };
    MetricState bumped = round;
    for (int a = 0; a < grid->size(); ++a) bumped.u[a] = ufun(grid->theta_of(a), grid->phi_of(a));
    auto Rb = scalar_curvature(bumped);
    for (int a = 0; a < grid->size(); ++a) {
        double K = brioschi_curvature(ufun, grid->theta_of(a), grid->phi_of(a));
        uc.conformal_identity_error =
            std::max(uc.conformal_identity_error, std::abs(Rb[a] - uc.curvature_scale * K));
    }

    // (iv) integration by parts with the nodal gradient pairing.
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
        Field f(grid->size()), h(grid->size());
        for (auto& v : f) v = nd(rng);
        for (auto& v : h) v = nd(rng);
        auto lf = laplacian(f, bumped);
        Field prod(grid->size());
        for (int a = 0; a < grid->size(); ++a) prod[a] = lf[a] * h[a];
        double lhs = integrate(prod, bumped);
        double rhs = -dirichlet_pairing(*grid, f, h);
        uc.ibp_residual = std::max(uc.ibp_residual, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }

    if (std::abs(uc.total_area - 2.0) > 1e-10 || uc.round_curvature_error > 1e-10 ||
        uc.conformal_identity_error > 5e-2 || uc.ibp_residual > 1e-10)
        throw std::runtime_error("unit calibration self-test failed");
    return uc;
}

const UnitConstants& unit_constants() {
    static const UnitConstants uc = calibrate_units();
    return uc;
}

double section_log(const Vec3& x, const Vec3& p, double epsilon) {
    double s = 0.5 * (1.0 - dot(x, p));
    return std::log(std::max(s, 0.0) + epsilon * epsilon);
}

Vec3 log_density_gradient(const BackgroundMetric& bg, const Vec3& x) {
    Vec3 g{0.0, 0.0, 0.0};
    const double e2 = bg.epsilon * bg.epsilon;
    for (std::size_t j = 0; j < bg.divisor.k(); ++j) {
        const Vec3& p = bg.divisor.position(j);
        double px = dot(p, x);
        double s = std::max(0.5 * (1.0 - px), 0.0);
        double coef = bg.divisor.weight(j) / (2.0 * (s + e2));
        for (int a = 0; a < 3; ++a) g[a] += coef * (p[a] - px * x[a]);
    }
    return g;
}

BackgroundPtr background_metric(const GridPtr& grid, double epsilon) {
    return background_metric(grid, grid->placed_divisor(), epsilon);
}

BackgroundPtr background_metric(const GridPtr& grid, const Divisor& divisor, double epsilon) {
    if (!(epsilon > 0.0)) throw MetricError("smoothing length epsilon must be positive");
    if (divisor.k() > 0 && epsilon < 2.0 * grid->sigma_cell_width() * (1.0 - 1e-9))
        throw MetricError("cone core unresolved: epsilon " + std::to_string(epsilon) +
                          " is below two cell widths (" + std::to_string(2.0 * grid->sigma_cell_width()) +
                          "); refine the grid or increase epsilon");
    auto bg = std::make_shared<BackgroundMetric>();
    bg->grid = grid;
    bg->divisor = divisor;
    bg->epsilon = epsilon;
    bg->chi = euler_characteristic(divisor);
    const int n = grid->size();
    std::vector<Field> sec(divisor.k(), Field(n));
    bg->log_rho.assign(n, 0.0);
    for (std::size_t j = 0; j < divisor.k(); ++j) {
        for (int a = 0; a < n; ++a) {
            sec[j][a] = section_log(grid->xyz(a), divisor.position(j), epsilon);
            bg->log_rho[a] -= divisor.weight(j) * sec[j][a];
        }
    }
    double mx = *std::max_element(bg->log_rho.begin(), bg->log_rho.end());
    double total = 0.0;
    for (int a = 0; a < n; ++a) total += grid->weight(a) * std::exp(bg->log_rho[a] - mx);
    bg->log_norm = std::log(2.0 / total) - mx;
    bg->rho.resize(n);
    for (int a = 0; a < n; ++a) {
        bg->log_rho[a] += bg->log_norm;
        bg->rho[a] = std::exp(bg->log_rho[a]);
        if (!(bg->rho[a] > 0.0) || !std::isfinite(bg->rho[a]))
            throw MetricError("background density overflow; epsilon too small for this grid");
    }
    bg->cone_density.assign(n, 0.0);
    for (std::size_t j = 0; j < divisor.k(); ++j) {
        auto l = round_laplacian(*grid, sec[j]);
        for (int a = 0; a < n; ++a) bg->cone_density[a] += divisor.weight(j) * (0.5 + l[a]);
    }
    auto llr = round_laplacian(*grid, bg->log_rho);
    bg->curvature.resize(n);
    for (int a = 0; a < n; ++a) bg->curvature[a] = (1.0 - llr[a]) / bg->rho[a];

    Field rhs(n);
    for (int a = 0; a < n; ++a) rhs[a] = bg->half_chi() * (1.0 - bg->rho[a]);
    bg->h = grid->poisson().solve(rhs).f;
    double z = 0.0;
    for (int a = 0; a < n; ++a) z += grid->weight(a) * bg->rho[a] * std::exp(bg->h[a]);
    double shift = std::log(2.0 / z);
    for (auto& v : bg->h) v += shift;
    return bg;
}

double MetricState::density(int a) const { return background->rho[a] * std::exp(u[a]); }

Field MetricState::densities() const {
    Field m(u.size());
    for (std::size_t a = 0; a < u.size(); ++a) m[a] = background->rho[a] * std::exp(u[a]);
    return m;
}

MetricState initial_state(const BackgroundPtr& bg) {
    MetricState s;
    s.background = bg;
    s.u.assign(bg->grid->size(), 0.0);
    return s;
}

Field laplacian(const Field& f, const MetricState& m) {
    if (f.size() != m.u.size()) throw MetricError("field does not match the grid");
    auto out = round_laplacian(m.grid(), f);
    for (int a = 0; a < m.size(); ++a) out[a] /= m.density(a);
    return out;
}

Field scalar_curvature(const MetricState& m) {
    auto lu = round_laplacian(m.grid(), m.u);
    const auto& bg = *m.background;
    Field R(m.size());
    for (int a = 0; a < m.size(); ++a) R[a] = (bg.curvature[a] * bg.rho[a] - lu[a]) / m.density(a);
    return R;
}

Field regular_curvature(const MetricState& m) {
    auto lu = round_laplacian(m.grid(), m.u);
    const double hc = m.background->half_chi();
    Field R(m.size());
    for (int a = 0; a < m.size(); ++a) R[a] = (hc - lu[a]) / m.density(a);
    return R;
}

double integrate(const Field& f, const MetricState& m) {
    const auto& g = m.grid();
    double s = 0.0;
    for (int a = 0; a < m.size(); ++a) s += f[a] * g.weight(a) * m.density(a);
    return s;
}

double area(const MetricState& m) {
    const auto& g = m.grid();
    double s = 0.0;
    for (int a = 0; a < m.size(); ++a) s += g.weight(a) * m.density(a);
    return s;
}

Field gradient_sq(const Field& f, const MetricState& m) {
    const auto& g = m.grid();
    Field out(m.size(), 0.0);
    for (const auto& fc : g.faces()) {
        double d = f[fc.a] - f[fc.b];
        double e = 0.5 * fc.T * d * d;
        out[fc.a] += e;
        out[fc.b] += e;
    }
    for (int a = 0; a < m.size(); ++a) out[a] /= g.weight(a) * m.density(a);
    return out;
}

MetricState conical_state(const BackgroundPtr& bg, const std::function<double(int)>& log_density) {
    MetricState m = initial_state(bg);
    const auto& g = *bg->grid;
    for (int a = 0; a < m.size(); ++a) {
        double u = log_density(a) - bg->log_norm;
        for (std::size_t j = 0; j < bg->divisor.k(); ++j) {
            double s = 0.5 * (1.0 - dot(g.xyz(a), bg->divisor.position(j)));
            u += bg->divisor.weight(j) * std::log(std::max(s, 1e-300));
        }
        m.u[a] = u;
    }
    renormalize(m);
    return m;
}

double renormalize(MetricState& m) {
    double c = std::log(2.0 / area(m));
    for (auto& v : m.u) v += c;
    return c;
}

}  // namespace conicflow
