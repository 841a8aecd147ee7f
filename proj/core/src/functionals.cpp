#include "conicflow/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace conicflow {

namespace {

/// log sum_a c_a e^{x_a} for positive coefficients, stable for large exponents.
double log_weighted_sum_exp(const Field& coef, const Field& x) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : x) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) s += coef[a] * std::exp(x[a] - mx);
    return mx + std::log(s);
}

Field mass(const MetricState& m) {
    Field M(m.size());
    for (int a = 0; a < m.size(); ++a) M[a] = m.grid().weight(a) * m.density(a);
    return M;
}

Field background_mass(const BackgroundMetric& bg) {
    Field M(bg.rho.size());
    for (std::size_t a = 0; a < M.size(); ++a) M[a] = bg.grid->weight(static_cast<int>(a)) * bg.rho[a];
    return M;
}

void require_positive_chi(const BackgroundMetric& bg) {
    if (!(bg.chi > 0.0)) throw FunctionalError("functional needs weight sum below 2 (chi > 0)");
}

}  // namespace

RicciPotential ricci_potential(const MetricState& m) {
    const double hc = m.background->half_chi();
    Field rhs(m.size());
    for (int a = 0; a < m.size(); ++a) rhs[a] = hc * (1.0 - m.density(a));
    auto sol = m.grid().poisson().solve(rhs);
    RicciPotential rp;
    rp.mean_correction = sol.mean_correction;
    rp.v.resize(m.size());
    for (int a = 0; a < m.size(); ++a) rp.v[a] = sol.f[a] - m.u[a];
    Field neg(m.size());
    for (int a = 0; a < m.size(); ++a) neg[a] = -rp.v[a];
    double shift = log_weighted_sum_exp(mass(m), neg) - std::log(2.0);
    for (auto& x : rp.v) x += shift;
    double z = 0.0;
    for (int a = 0; a < m.size(); ++a) z += m.grid().weight(a) * m.density(a) * std::exp(-rp.v[a]);
    rp.normalization_residual = std::abs(z - 2.0);
    return rp;
}

PotentialPair recover_potential(const MetricState& m) {
    const auto& bg = *m.background;
    Field rhs(m.size());
    for (int a = 0; a < m.size(); ++a) rhs[a] = m.density(a) - bg.rho[a];
    auto sol = m.grid().poisson().solve(rhs);
    PotentialPair pp;
    pp.mean_correction = sol.mean_correction;
    pp.phi = std::move(sol.f);
    double s = 0.0;
    for (int a = 0; a < m.size(); ++a) s += m.grid().weight(a) * bg.rho[a] * pp.phi[a];
    for (auto& x : pp.phi) x -= 0.5 * s;
    return pp;
}

double f_beta_eps(const BackgroundMetric& bg, const Field& phi, double eps_f) {
    require_positive_chi(bg);
    const double a = bg.half_chi() - eps_f;
    if (!(eps_f >= 0.0) || !(a > 0.0)) throw FunctionalError("eps_F must lie in [0, chi/2)");
    const auto& g = *bg.grid;
    double dir = dirichlet_energy(g, phi);
    double lin = 0.0;
    Field expo(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        lin += g.weight(static_cast<int>(i)) * bg.rho[i] * phi[i];
        expo[i] = -a * phi[i] + bg.h[i];
    }
    return 0.25 * dir - 0.5 * lin - log_weighted_sum_exp(background_mass(bg), expo) / a;
}

double f_beta(const BackgroundMetric& bg, const Field& phi) { return f_beta_eps(bg, phi, 0.0); }

double f_beta(const MetricState& m) { return f_beta(*m.background, recover_potential(m).phi); }

double f_beta_eps(const MetricState& m, double eps_f) {
    return f_beta_eps(*m.background, recover_potential(m).phi, eps_f);
}

double f_beta_dissipation(const MetricState& m) {
    auto rp = ricci_potential(m);
    // Flip to the convention Delta v = chi/2 - R and renormalize int e^{-v} dg = 2.
    Field vp(m.size());
    for (int a = 0; a < m.size(); ++a) vp[a] = -rp.v[a];
    Field neg(m.size());
    for (int a = 0; a < m.size(); ++a) neg[a] = -vp[a];
    double shift = log_weighted_sum_exp(mass(m), neg) - std::log(2.0);
    double s = 0.0;
    for (int a = 0; a < m.size(); ++a) {
        double v = vp[a] + shift;
        s += m.grid().weight(a) * m.density(a) * v * (-std::expm1(-v));
    }
    return -0.5 * s;
}

double w_functional(const MetricState& m, const Field& f, double tau) {
    if (!(tau > 0.0)) throw FunctionalError("tau must be positive");
    auto R = regular_curvature(m);
    auto G = gradient_sq(f, m);
    double s = 0.0;
    for (int a = 0; a < m.size(); ++a)
        s += m.grid().weight(a) * m.density(a) * (tau * (R[a] + G[a]) + f[a] - 2.0) * std::exp(-f[a]);
    return s / (4.0 * std::numbers::pi * tau);
}

NormalizedW normalized_w(const MetricState& m, const Field& f) {
    require_positive_chi(*m.background);
    const double chi = m.background->chi;
    Field neg(m.size());
    for (int a = 0; a < m.size(); ++a) neg[a] = -f[a];
    NormalizedW out;
    out.shift = log_weighted_sum_exp(mass(m), neg) - std::log(2.0);
    Field fs(f);
    for (auto& x : fs) x += out.shift;
    auto R = regular_curvature(m);
    auto G = gradient_sq(fs, m);
    double s = 0.0;
    for (int a = 0; a < m.size(); ++a)
        s += m.grid().weight(a) * m.density(a) * ((R[a] + G[a]) / chi + fs[a]) * std::exp(-fs[a]);
    out.value = s;
    return out;
}

double normalized_w_at_potential(const MetricState& m) {
    auto rp = ricci_potential(m);
    Field f(m.size());
    for (int a = 0; a < m.size(); ++a) f[a] = -rp.v[a];
    return normalized_w(m, f).value;
}

MuEstimate mu_estimate(const MetricState& m, int budget) {
    require_positive_chi(*m.background);
    const double chi = m.background->chi;
    const auto& g = m.grid();
    const int n = m.size();
    const Field M = mass(m);
    const Field R = regular_curvature(m);

    auto shift_onto_constraint = [&](Field& f) {
        Field neg(n);
        for (int a = 0; a < n; ++a) neg[a] = -f[a];
        double s = log_weighted_sum_exp(M, neg) - std::log(2.0);
        for (auto& x : f) x += s;
    };
    auto value = [&](const Field& f) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += M[a] * (R[a] / chi + f[a]) * std::exp(-f[a]);
        for (const auto& fc : g.faces()) {
            double d = f[fc.a] - f[fc.b];
            s += fc.T * d * d * 0.5 * (std::exp(-f[fc.a]) + std::exp(-f[fc.b])) / chi;
        }
        return s;
    };

    MuEstimate est;
    auto rp = ricci_potential(m);
    est.f.resize(n);
    for (int a = 0; a < n; ++a) est.f[a] = -rp.v[a];
    shift_onto_constraint(est.f);
    double J = value(est.f);
    est.history.push_back(J);

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    bool analyzed = false;
    for (int it = 0; it < budget; ++it) {
        const Field& f = est.f;
        Eigen::VectorXd grad(n), c(n);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(n + 4 * g.faces().size());
        for (int a = 0; a < n; ++a) {
            double e = std::exp(-f[a]);
            grad[a] = M[a] * e * (1.0 - R[a] / chi - f[a]);
            c[a] = -M[a] * e;
            trip.emplace_back(a, a, M[a] * e);
        }
        for (const auto& fc : g.faces()) {
            double ea = std::exp(-f[fc.a]), eb = std::exp(-f[fc.b]);
            double d = f[fc.a] - f[fc.b];
            grad[fc.a] += fc.T * (d * (ea + eb) - 0.5 * d * d * ea) / chi;
            grad[fc.b] += fc.T * (-d * (ea + eb) - 0.5 * d * d * eb) / chi;
            double k = fc.T * (ea + eb) / chi;
            trip.emplace_back(fc.a, fc.a, k);
            trip.emplace_back(fc.b, fc.b, k);
            trip.emplace_back(fc.a, fc.b, -k);
            trip.emplace_back(fc.b, fc.a, -k);
        }
        Eigen::SparseMatrix<double> H(n, n);
        H.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            solver.analyzePattern(H);
            analyzed = true;
        }
        solver.factorize(H);
        if (solver.info() != Eigen::Success) throw FunctionalError("mu descent: preconditioner failed");
        Eigen::VectorXd d1 = solver.solve(-grad), d0 = solver.solve(c);
        Eigen::VectorXd dir = d1 - (c.dot(d1) / c.dot(d0)) * d0;
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) break;

        bool accepted = false;
        for (double step = 1.0; step > 1e-10; step *= 0.5) {
            Field trial(f);
            for (int a = 0; a < n; ++a) trial[a] += step * dir[a];
            shift_onto_constraint(trial);
            double Jt = value(trial);
            if (!std::isfinite(Jt)) continue;
            if (Jt <= J + 1e-4 * step * slope) {
                est.f = std::move(trial);
                J = Jt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        est.history.push_back(J);
        est.iterations = it + 1;
    }
    if (!std::isfinite(J)) throw FunctionalError("mu descent diverged");
    est.value = J;
    return est;
}

double hamilton_entropy(const MetricState& m, double s) {
    auto R = regular_curvature(m);
    double acc = 0.0;
    for (int a = 0; a < m.size(); ++a) {
        double x = R[a] - s;
        if (!(x > 0.0)) {
            std::ostringstream os;
            os << "Hamilton entropy needs R - s > 0; fails at node " << a << " (R = " << R[a] << ", s = " << s << ")";
            throw FunctionalError(os.str());
        }
        acc += m.grid().weight(a) * m.density(a) * x * std::log(x);
    }
    return acc;
}

double chow_shift(double s0, double t, double half_chi) {
    if (s0 == 0.0) return 0.0;
    // y = 1/s solves y' = half_chi y - 1.
    double y = 1.0 / half_chi + (1.0 / s0 - 1.0 / half_chi) * std::exp(half_chi * t);
    return 1.0 / y;
}

double soliton_residual(const MetricState& m) { return soliton_residual_of(m, ricci_potential(m).v); }

double soliton_residual_of(const MetricState& m, const Field& v) {
    const auto& g = m.grid();
    const int nl = g.n_lat(), nn = g.n_lon();
    const double dt = g.dtheta(), dp = g.dphi();
    const int half = nn / 2;
    auto at = [&](const Field& f, int i, int j) {
        if (i < 0) return f[g.node(-i - 1, ((j + half) % nn + nn) % nn)];
        if (i >= nl) return f[g.node(2 * nl - i - 1, ((j + half) % nn + nn) % nn)];
        return f[g.node(i, (j % nn + nn) % nn)];
    };
    double total = 0.0;
    for (int i = 0; i < nl; ++i) {
        double th = g.theta(i), st = std::sin(th), ct = std::cos(th), cot = ct / st;
        for (int j = 0; j < nn; ++j) {
            int a = g.node(i, j);
            double v0 = v[a];
            double vt = (at(v, i + 1, j) - at(v, i - 1, j)) / (2 * dt);
            double vtt = (at(v, i + 1, j) - 2 * v0 + at(v, i - 1, j)) / (dt * dt);
            double vp = 0, vpp = 0, vtp = 0, up = 0;
            if (nn > 1) {
                vp = (at(v, i, j + 1) - at(v, i, j - 1)) / (2 * dp);
                vpp = (at(v, i, j + 1) - 2 * v0 + at(v, i, j - 1)) / (dp * dp);
                vtp = (at(v, i + 1, j + 1) - at(v, i + 1, j - 1) - at(v, i - 1, j + 1) + at(v, i - 1, j - 1)) /
                      (4 * dt * dp);
                up = (at(m.u, i, j + 1) - at(m.u, i, j - 1)) / (2 * dp);
            }
            double ut = (at(m.u, i + 1, j) - at(m.u, i - 1, j)) / (2 * dt);
            double ph = g.phi(j);
            Vec3 e_t{ct * std::cos(ph), ct * std::sin(ph), -st};
            Vec3 e_p{-std::sin(ph), std::cos(ph), 0.0};
            Vec3 glr = log_density_gradient(*m.background, g.xyz(a));
            double sig_t = 0.5 * (dot(glr, e_t) + ut);
            double sig_p = 0.5 * (dot(glr, e_p) + up / st);
            double v_hat_p = vp / st;
            double htt = vtt - 2 * sig_t * vt;
            double hpp = vpp / (st * st) + cot * vt - 2 * sig_p * v_hat_p;
            double htp = (vtp - cot * vp) / st - (sig_t * v_hat_p + sig_p * vt);
            double tf2 = 0.5 * (htt - hpp) * (htt - hpp) + 2 * htp * htp;
            total += g.weight(a) * tf2 / m.density(a);
        }
    }
    return 0.25 * total;
}

}  // namespace conicflow
