#include "conicflow/flow.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "conicflow/functionals.hpp"
#include "conicflow/geodesic.hpp"
#include "conicflow/io.hpp"

namespace conicflow {

namespace {

bool all_finite(const Field& f) {
    return std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
}

double max_of(const Field& f) { return *std::max_element(f.begin(), f.end()); }
double min_of(const Field& f) { return *std::min_element(f.begin(), f.end()); }

/// Y(log rho) + div Y - d/dt log rho for the Moebius field Y = V - (V.x)x when the marked points
/// move by dp/dt = -Y(p): the exact change of the smoothed reference. Used for the F cocycle.
double gauge_source(const BackgroundMetric& bg, const Vec3& x, const Vec3& V) {
    const double e2 = bg.epsilon * bg.epsilon;
    double s_total = -2.0 * dot(V, x);
    for (std::size_t j = 0; j < bg.divisor.k(); ++j) {
        const Vec3& p = bg.divisor.position(j);
        double s = std::max(0.5 * (1.0 - dot(x, p)), 0.0);
        Vec3 xp{x[0] + p[0], x[1] + p[1], x[2] + p[2]};
        s_total += bg.divisor.weight(j) * dot(V, xp) * s / (s + e2);
    }
    return s_total;
}

/// The same source for the unsmoothed cone factors. The kernel dilation it omits is core-localized;
/// dropping it makes the induced curvature change proportional to R instead of a 1/eps^2 source.
double gauge_source_regular(const BackgroundMetric& bg, const Vec3& x, const Vec3& V) {
    double s_total = -2.0 * dot(V, x);
    for (std::size_t j = 0; j < bg.divisor.k(); ++j) {
        const Vec3& p = bg.divisor.position(j);
        s_total += bg.divisor.weight(j) * (dot(V, x) + dot(V, p));
    }
    return s_total;
}

Vec3 moebius_field(const Vec3& V, const Vec3& x) {
    double vx = dot(V, x);
    return {V[0] - vx * x[0], V[1] - vx * x[1], V[2] - vx * x[2]};
}

std::vector<Vec3> move_points(const std::vector<Vec3>& pts, const Vec3& V, double dt) {
    // Midpoint rule for dp/dt = -Y(p), then back onto the sphere.
    std::vector<Vec3> out;
    for (const auto& p : pts) {
        Vec3 y = moebius_field(V, p);
        Vec3 mid = normalized({p[0] - 0.5 * dt * y[0], p[1] - 0.5 * dt * y[1], p[2] - 0.5 * dt * y[2]});
        Vec3 ym = moebius_field(V, mid);
        out.push_back(normalized({p[0] - dt * ym[0], p[1] - dt * ym[1], p[2] - dt * ym[2]}));
    }
    return out;
}

}  // namespace

Field flow_rhs(const MetricState& m, RhsForm form) {
    const auto& bg = *m.background;
    const double hc = bg.half_chi();
    if (form == RhsForm::Curvature) {
        auto R = regular_curvature(m);
        for (auto& r : R) r = hc - r;
        return R;
    }
    auto lu = round_laplacian(m.grid(), m.u);
    Field out(m.size());
    for (int a = 0; a < m.size(); ++a) {
        double eu = std::exp(-m.u[a]);
        out[a] = eu * (lu[a] / bg.rho[a]) + hc - eu * (hc / bg.rho[a]);
    }
    return out;
}

double explicit_dt_bound(const MetricState& m, double cfl) {
    const auto& g = m.grid();
    Field tsum(m.size(), 0.0);
    for (const auto& f : g.faces()) {
        tsum[f.a] += f.T;
        tsum[f.b] += f.T;
    }
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < m.size(); ++a)
        if (tsum[a] > 0.0) bound = std::min(bound, g.weight(a) * m.density(a) / tsum[a]);
    return cfl * bound;
}

MetricState step(const MetricState& m, double dt, Stepper stepper, RhsForm form) {
    if (!(dt > 0.0)) throw FlowError("dt must be positive");
    MetricState out = m;
    if (stepper == Stepper::RK2) {
        if (dt > explicit_dt_bound(m)) throw FlowError("dt violates the explicit stability bound");
        auto k1 = flow_rhs(m, form);
        MetricState mid = m;
        for (int a = 0; a < m.size(); ++a) mid.u[a] += dt * k1[a];
        auto k2 = flow_rhs(mid, form);
        for (int a = 0; a < m.size(); ++a) out.u[a] += 0.5 * dt * (k1[a] + k2[a]);
    } else {
        const auto& g = m.grid();
        const double hc = m.background->half_chi();
        Eigen::SparseMatrix<double> K = g.stiffness();
        Eigen::VectorXd rhs(m.size());
        for (int a = 0; a < m.size(); ++a) {
            double wm = g.weight(a) * m.density(a);
            K.coeffRef(a, a) += wm / dt;
            rhs[a] = wm * m.u[a] / dt + g.weight(a) * (hc * m.density(a) - hc);
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
        Eigen::VectorXd x = ldlt.solve(rhs);
        for (int a = 0; a < m.size(); ++a) out.u[a] = x[a];
    }
    if (!all_finite(out.u)) throw FlowError("non-finite conformal factor", m);
    renormalize(out);
    out.t = m.t + dt;
    return out;
}

struct FlowStepper::Workspace {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool ldlt_ready = false, lu_ready = false;
    // Finite-difference neighbors: north/south (with cross-pole ghosts), west/east.
    std::vector<int> north, south, west, east;
    std::vector<Vec3> e_theta, e_phi;
    std::vector<double> sin_theta;
    Field tsum;
};

FlowStepper::FlowStepper(const FlowConfig& cfg, MetricState initial)
    : cfg_(cfg), state_(std::move(initial)), ws_(std::make_shared<Workspace>()) {
    const auto& g = state_.grid();
    const int n = g.size(), nl = g.n_lat(), nn = g.n_lon(), half = nn / 2;
    ws_->north.resize(n);
    ws_->south.resize(n);
    ws_->west.assign(n, -1);
    ws_->east.assign(n, -1);
    ws_->e_theta.resize(n);
    ws_->e_phi.resize(n);
    ws_->sin_theta.resize(n);
    for (int i = 0; i < nl; ++i) {
        for (int j = 0; j < nn; ++j) {
            int a = g.node(i, j);
            ws_->north[a] = i > 0 ? g.node(i - 1, j) : g.node(0, (j + half) % nn);
            ws_->south[a] = i + 1 < nl ? g.node(i + 1, j) : g.node(nl - 1, (j + half) % nn);
            if (nn > 1) {
                ws_->west[a] = g.node(i, (j + nn - 1) % nn);
                ws_->east[a] = g.node(i, (j + 1) % nn);
            }
            double th = g.theta(i), ph = g.phi(j);
            ws_->e_theta[a] = {std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th)};
            ws_->e_phi[a] = {-std::sin(ph), std::cos(ph), 0.0};
            ws_->sin_theta[a] = std::sin(th);
        }
    }
    ws_->tsum.assign(n, 0.0);
    for (const auto& f : g.faces()) {
        ws_->tsum[f.a] += f.T;
        ws_->tsum[f.b] += f.T;
    }
}

FlowStepper::Gauge3 FlowStepper::gauge_field(const Field& R_reg) const {
    const auto& g = state_.grid();
    const double hc = state_.background->half_chi();
    Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero(), c = Eigen::Vector3d::Zero();
    for (int a = 0; a < g.size(); ++a) {
        const Vec3& x = g.xyz(a);
        double M = g.weight(a) * state_.density(a);
        for (int i = 0; i < 3; ++i) {
            c[i] += M * x[i];
            b[i] += M * x[i] * (hc - R_reg[a]);
            for (int k = 0; k < 3; ++k) G(i, k) += M * ((i == k ? 1.0 : 0.0) - x[i] * x[k]);
        }
    }
    b += c / cfg_.gauge_relax_time;
    Gauge3 out;
    if (g.axisymmetric()) {
        out.V = {0.0, 0.0, b[2] / G(2, 2)};
    } else {
        Eigen::Vector3d V = G.ldlt().solve(b);
        out.V = {V[0], V[1], V[2]};
    }
    return out;
}

void FlowStepper::rebuild_background(const std::vector<Vec3>& positions) {
    const auto& old = *state_.background;
    state_.background = background_metric(old.grid, old.divisor.with_positions(positions), old.epsilon);
}

double FlowStepper::f_beta_total() const { return f_beta(state_) + cocycle_; }

double FlowStepper::advance(double dt_max) {
    const MetricState last_good = state_;
    const auto& g = state_.grid();
    const int n = g.size();
    const auto& bg = *state_.background;
    const double hc = bg.half_chi();
    const bool gauged = cfg_.gauge == Gauge::CenterOfMass && bg.divisor.k() > 0;

    Field R = regular_curvature(state_);
    double dt = dt_max;
    double rmax = max_of(R);
    if (rmax > 0.0) dt = std::min(dt, cfg_.reaction_cfl / rmax);

    Vec3 V{0, 0, 0};
    Field S(n, 0.0);
    std::vector<Vec3> Y(n, Vec3{0, 0, 0});
    if (gauged) {
        V = gauge_field(R).V;
        gauge_speed_ = std::sqrt(dot(V, V));
        for (int a = 0; a < n; ++a) {
            Y[a] = moebius_field(V, g.xyz(a));
            S[a] = gauge_source_regular(bg, g.xyz(a), V);
        }
    } else {
        gauge_speed_ = 0.0;
    }

    // Directional derivative Y(u) as sparse rows: hybrid central/upwind by cell Peclet number.
    struct Entry {
        int col;
        double val;
    };
    std::vector<std::array<Entry, 5>> adv;
    if (gauged) {
        adv.resize(n);
        for (int a = 0; a < n; ++a) {
            double m = state_.density(a);
            double yt = dot(Y[a], ws_->e_theta[a]);
            double yp = dot(Y[a], ws_->e_phi[a]) / ws_->sin_theta[a];
            double dth = g.dtheta(), dph = g.dphi();
            std::array<Entry, 5> row{Entry{a, 0.0}, Entry{ws_->north[a], 0.0}, Entry{ws_->south[a], 0.0},
                                     Entry{ws_->west[a] < 0 ? a : ws_->west[a], 0.0},
                                     Entry{ws_->east[a] < 0 ? a : ws_->east[a], 0.0}};
            // theta direction: increasing theta is "south".
            if (std::abs(yt) * dth * 2.0 * m <= 2.0) {
                row[2].val += yt / (2 * dth);
                row[1].val -= yt / (2 * dth);
            } else if (yt > 0) {
                row[2].val += yt / dth;
                row[0].val -= yt / dth;
            } else {
                row[0].val += yt / dth;
                row[1].val -= yt / dth;
            }
            if (ws_->west[a] >= 0) {
                double speed = std::abs(yp) * ws_->sin_theta[a];
                if (speed * dph * 2.0 * m <= 2.0) {
                    row[4].val += yp / (2 * dph);
                    row[3].val -= yp / (2 * dph);
                } else if (yp > 0) {
                    row[4].val += yp / dph;
                    row[0].val -= yp / dph;
                } else {
                    row[0].val += yp / dph;
                    row[3].val -= yp / dph;
                }
            }
            adv[a] = row;
        }
    }

    MetricState next = state_;
    if (cfg_.stepper == Stepper::RK2) {
        dt = std::min(dt, explicit_dt_bound(state_, cfg_.cfl));
        if (gauged) {
            double vmax = 0.0;
            for (int a = 0; a < n; ++a) {
                double yt = std::abs(dot(Y[a], ws_->e_theta[a])) / g.dtheta();
                double yp = std::abs(dot(Y[a], ws_->e_phi[a])) / (ws_->sin_theta[a] * g.dphi());
                vmax = std::max(vmax, yt + (ws_->west[a] >= 0 ? yp : 0.0));
            }
            if (vmax > 0) dt = std::min(dt, 0.5 / vmax);
        }
        auto full_rhs = [&](const MetricState& s) {
            Field k = flow_rhs(s, cfg_.rhs_form);
            if (gauged)
                for (int a = 0; a < n; ++a) {
                    double yu = 0.0;
                    for (const auto& e : adv[a]) yu += e.val * s.u[e.col];
                    k[a] += yu + S[a];
                }
            return k;
        };
        auto k1 = full_rhs(state_);
        MetricState mid = state_;
        for (int a = 0; a < n; ++a) mid.u[a] += dt * k1[a];
        auto k2 = full_rhs(mid);
        for (int a = 0; a < n; ++a) next.u[a] += 0.5 * dt * (k1[a] + k2[a]);
    } else {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(4 * g.faces().size() + 6 * n);
        for (const auto& f : g.faces()) {
            trip.emplace_back(f.a, f.a, f.T);
            trip.emplace_back(f.b, f.b, f.T);
            trip.emplace_back(f.a, f.b, -f.T);
            trip.emplace_back(f.b, f.a, -f.T);
        }
        Eigen::VectorXd rhs(n);
        for (int a = 0; a < n; ++a) {
            double m = state_.density(a);
            double wm = g.weight(a) * m;
            trip.emplace_back(a, a, wm / dt);
            rhs[a] = wm * state_.u[a] / dt + g.weight(a) * (hc * m - hc + m * S[a]);
            if (gauged)
                for (const auto& e : adv[a]) trip.emplace_back(a, e.col, -wm * e.val);
        }
        Eigen::SparseMatrix<double> K(n, n);
        K.setFromTriplets(trip.begin(), trip.end());
        Eigen::VectorXd x;
        if (gauged) {
            if (!ws_->lu_ready) {
                ws_->lu.analyzePattern(K);
                ws_->lu_ready = true;
            }
            ws_->lu.factorize(K);
            if (ws_->lu.info() != Eigen::Success) throw FlowError("implicit step factorization failed", last_good);
            x = ws_->lu.solve(rhs);
        } else {
            if (!ws_->ldlt_ready) {
                ws_->ldlt.analyzePattern(K);
                ws_->ldlt_ready = true;
            }
            ws_->ldlt.factorize(K);
            if (ws_->ldlt.info() != Eigen::Success) throw FlowError("implicit step factorization failed", last_good);
            x = ws_->ldlt.solve(rhs);
        }
        for (int a = 0; a < n; ++a) next.u[a] = x[a];
    }
    if (!all_finite(next.u)) throw FlowError("non-finite conformal factor at t = " + std::to_string(state_.t), last_good);

    if (gauged) {
        auto moved = move_points(bg.divisor.positions(), V, dt);
        auto new_bg = background_metric(bg.grid, bg.divisor.with_positions(moved), bg.epsilon);
        // Cocycle for the moved reference: the pulled-back old reference equals e^{a} times the new one.
        Field a_log(n);
        for (int a = 0; a < n; ++a)
            a_log[a] = 0.5 * dt * (gauge_source(bg, g.xyz(a), V) + gauge_source(*new_bg, g.xyz(a), V)) + new_bg->log_rho[a];
        double mx = max_of(a_log), z = 0.0;
        for (int a = 0; a < n; ++a) z += g.weight(a) * std::exp(a_log[a] - mx);
        MetricState pulled;
        pulled.background = new_bg;
        pulled.u.resize(n);
        for (int a = 0; a < n; ++a) pulled.u[a] = a_log[a] - mx + std::log(2.0 / z) - new_bg->log_rho[a];
        // F(ref; ref) is a constant, not zero; remove it so the increments compose.
        cocycle_ -= f_beta(pulled) - f_beta(initial_state(new_bg));
        next.background = new_bg;
    }

    next.t = state_.t + dt;
    state_ = std::move(next);
    ++step_count_;
    if (cfg_.renormalize_every > 0 && step_count_ % cfg_.renormalize_every == 0) last_drift_ = renormalize(state_);
    else last_drift_ = 0.0;
    if (!all_finite(state_.u)) throw FlowError("non-finite conformal factor after renormalization", last_good);
    return dt;
}

GridPtr make_grid(const FlowConfig& cfg) {
    if (cfg.axisymmetric) return build_axisymmetric_grid(cfg.n_lat, cfg.divisor);
    return build_grid(cfg.n_lat, cfg.n_lon, cfg.divisor);
}

MetricState make_initial_state(const FlowConfig& cfg) {
    auto grid = make_grid(cfg);
    auto bg = background_metric(grid, cfg.epsilon);
    MetricState s = initial_state(bg);
    if (cfg.initial == InitialKind::Bump) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> nd;
        Vec3 c{0, 0, 1};
        if (!grid->axisymmetric()) c = normalized({nd(rng), nd(rng), nd(rng)});
        else c = nd(rng) > 0 ? Vec3{0, 0, 1} : Vec3{0, 0, -1};
        for (int a = 0; a < s.size(); ++a) {
            double ang = angle_between(grid->xyz(a), c);
            s.u[a] = cfg.bump_amplitude * std::exp(-ang * ang / (2.0 * cfg.bump_width * cfg.bump_width));
        }
    } else if (cfg.initial == InitialKind::File) {
        auto f = read_field(cfg.initial_file);
        if (static_cast<int>(f.size()) != s.size())
            throw FlowError("initial field has " + std::to_string(f.size()) + " values, grid has " +
                            std::to_string(s.size()));
        s.u = f;
    }
    renormalize(s);
    return s;
}

TraceRecord measure(const MetricState& m, const FlowConfig& cfg, double chow_s) {
    TraceRecord r;
    const auto& g = m.grid();
    const auto& bg = *m.background;
    r.t = m.t;
    r.area = area(m);
    auto Rfull = scalar_curvature(m);
    r.int_R = integrate(Rfull, m);
    auto R = regular_curvature(m);
    r.int_R_reg = integrate(R, m);
    r.min_R = min_of(R);
    r.max_R = max_of(R);
    for (double v : R) r.sup_abs_R = std::max(r.sup_abs_R, std::abs(v));
    for (int a = 0; a < m.size(); ++a) {
        bool excluded = false;
        for (const auto& p : bg.divisor.positions())
            if (std::sqrt(std::max(0.0, 0.5 * (1.0 - dot(g.xyz(a), p)))) < cfg.exclusion) excluded = true;
        if (!excluded) r.sup_dev = std::max(r.sup_dev, std::abs(R[a] - bg.half_chi()));
    }
    if (bg.chi > 0.0) {
        r.f_beta = f_beta(m);
        auto pp = recover_potential(m);
        r.f_beta_eps_combo = f_beta(bg, pp.phi) + cfg.eps_f * dirichlet_energy(g, pp.phi);
        r.f_beta_rate = f_beta_dissipation(m);
        r.normalized_w = normalized_w_at_potential(m);
    }
    r.chow_s = chow_s;
    try {
        r.hamilton_n = hamilton_entropy(m, chow_s);
    } catch (const std::exception&) {
        r.hamilton_n = std::numeric_limits<double>::quiet_NaN();
    }
    r.soliton_residual = soliton_residual(m);
    r.diameter = diameter_estimate(m);
    const auto& pts = bg.divisor.positions();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        DistanceField df(m, pts[i]);
        for (std::size_t j = i + 1; j < pts.size(); ++j) r.distances.push_back(df.to_point(pts[j]));
        double vol = 0.0;
        for (int a = 0; a < m.size(); ++a)
            if (df.at_node(a) <= cfg.ratio_radius) vol += g.weight(a) * m.density(a);
        // Model: constant curvature 1 - beta_max, i.e. Gauss curvature K = 2 pi (1 - beta_max).
        double K = 2.0 * 3.14159265358979323846 * (1.0 - bg.divisor.beta_max());
        double model = 2.0 * 3.14159265358979323846 * (1.0 - std::cos(std::sqrt(K) * cfg.ratio_radius)) / K;
        r.volume_ratios.push_back(vol / model);
    }
    r.positions = pts;
    return r;
}

FlowResult run(const FlowConfig& cfg, const RunHooks& hooks) {
    FlowResult res;
    MetricState s0 = make_initial_state(cfg);
    res.trace.k = s0.background->divisor.k();
    FlowStepper stepper(cfg, s0);
    const double hc = s0.background->half_chi();
    auto R0 = regular_curvature(s0);
    // Shift only when needed: with inf R > 0 the plain entropy is monotone, while a nonzero shift
    // adds a term of indefinite sign in these units.
    res.chow_s0 = min_of(R0) > 0.0 ? 0.0 : min_of(R0) - cfg.chow_margin * hc;
    if (hc > 0.0 && cfg.mu_budget > 0) res.initial_mu = mu_estimate(s0, cfg.mu_budget).value;

    auto record = [&](const MetricState& m, TraceRecord acc) {
        TraceRecord r = measure(m, cfg, chow_shift(res.chow_s0, m.t, hc));
        r.step = acc.step;
        r.dt = acc.dt;
        r.max_area_error = acc.max_area_error;
        r.max_drift = acc.max_drift;
        r.f_violation = acc.f_violation;
        r.n_violation = acc.n_violation;
        r.gauge_speed = acc.gauge_speed;
        if (hc > 0.0) r.f_beta = stepper.f_beta_total();
        res.sup_abs_R = std::max(res.sup_abs_R, r.sup_abs_R);
        r.sup_abs_R = res.sup_abs_R;
        res.trace.records.push_back(r);
        if (hooks.sample) hooks.sample(r);
    };

    TraceRecord acc;
    acc.max_area_error = std::abs(area(s0) - 2.0);
    record(s0, acc);
    if (hooks.snapshot) hooks.snapshot(s0);

    double f_prev = hc > 0.0 ? stepper.f_beta_total() : 0.0;
    auto n_at = [&](const MetricState& m) {
        try {
            return hamilton_entropy(m, chow_shift(res.chow_s0, m.t, hc));
        } catch (const std::exception&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    double n_prev = n_at(s0);
    double next_sample = cfg.sample_every;
    double next_snapshot = cfg.snapshot_every > 0 ? cfg.snapshot_every : std::numeric_limits<double>::infinity();
    acc = TraceRecord{};
    int quiet_samples = 0;
    try {
        while (stepper.state().t < cfg.t_max - 1e-12) {
            double target = std::min({next_sample, cfg.t_max});
            double dt = stepper.advance(std::min(cfg.dt, target - stepper.state().t));
            const auto& st = stepper.state();
            ++res.steps;
            acc.step = res.steps;
            acc.dt = dt;
            acc.gauge_speed = stepper.gauge_speed();
            double aerr = std::abs(area(st) - 2.0);
            acc.max_area_error = std::max(acc.max_area_error, aerr);
            res.max_area_error = std::max(res.max_area_error, aerr);
            acc.max_drift = std::max(acc.max_drift, std::abs(stepper.last_drift()));
            if (hc > 0.0) {
                double f = stepper.f_beta_total();
                acc.f_violation = std::max(acc.f_violation, f - f_prev);
                res.max_f_violation = std::max(res.max_f_violation, f - f_prev);
                f_prev = f;
            }
            double nv = n_at(st);
            if (std::isfinite(nv) && std::isfinite(n_prev)) {
                acc.n_violation = std::max(acc.n_violation, nv - n_prev);
                res.max_n_violation = std::max(res.max_n_violation, nv - n_prev);
            } else if (!std::isfinite(nv)) {
                res.max_n_violation = std::numeric_limits<double>::infinity();
            }
            n_prev = nv;
            if (st.t >= next_sample - 1e-9 || st.t >= cfg.t_max - 1e-12) {
                const TraceRecord prev = res.trace.records.back();
                record(st, acc);
                acc = TraceRecord{};
                next_sample += cfg.sample_every;
                if (cfg.auto_stop) {
                    const auto& cur = res.trace.records.back();
                    double delta = std::max({std::abs(cur.f_beta - prev.f_beta), std::abs(cur.sup_dev - prev.sup_dev),
                                             std::abs(cur.normalized_w - prev.normalized_w)});
                    for (std::size_t i = 0; i < cur.distances.size(); ++i)
                        delta = std::max(delta, std::abs(cur.distances[i] - prev.distances[i]));
                    quiet_samples = delta < cfg.auto_stop_tol ? quiet_samples + 1 : 0;
                    if (quiet_samples >= 10) {
                        res.auto_stopped = true;
                        break;
                    }
                }
            }
            if (st.t >= next_snapshot - 1e-9) {
                if (hooks.snapshot) hooks.snapshot(st);
                next_snapshot += cfg.snapshot_every;
            }
        }
        res.final_state = stepper.state();
    } catch (const FlowError& e) {
        res.complete = false;
        res.failure = e.what();
        res.final_state = e.last_good ? *e.last_good : stepper.state();
    }
    if (res.trace.records.back().t < res.final_state.t - 1e-12) record(res.final_state, acc);
    if (hooks.snapshot) hooks.snapshot(res.final_state);
    if (hc > 0.0 && cfg.mu_budget > 0 && res.complete) res.final_mu = mu_estimate(res.final_state, cfg.mu_budget).value;
    return res;
}

FlowResult run_axisymmetric(const FlowConfig& cfg, const RunHooks& hooks) {
    FlowConfig c = cfg;
    c.axisymmetric = true;
    c.n_lon = 1;
    return run(c, hooks);
}

std::vector<std::string> FlowTrace::columns() const {
    std::vector<std::string> c{"t", "step", "dt", "area", "max_area_error", "max_drift", "int_R", "int_R_reg",
                               "min_R", "max_R", "sup_abs_R", "sup_dev", "f_beta", "f_beta_rate",
                               "f_beta_eps_combo", "f_violation", "hamilton_n", "chow_s", "n_violation",
                               "normalized_w", "soliton_residual", "diameter", "gauge_speed"};
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) c.push_back("d_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    for (std::size_t i = 0; i < k; ++i) c.push_back("vol_ratio_" + std::to_string(i + 1));
    return c;
}

std::vector<double> FlowTrace::row(const TraceRecord& r) const {
    std::vector<double> v{r.t, static_cast<double>(r.step), r.dt, r.area, r.max_area_error, r.max_drift, r.int_R,
                          r.int_R_reg, r.min_R, r.max_R, r.sup_abs_R, r.sup_dev, r.f_beta, r.f_beta_rate,
                          r.f_beta_eps_combo, r.f_violation, r.hamilton_n, r.chow_s, r.n_violation, r.normalized_w,
                          r.soliton_residual, r.diameter, r.gauge_speed};
    v.insert(v.end(), r.distances.begin(), r.distances.end());
    v.insert(v.end(), r.volume_ratios.begin(), r.volume_ratios.end());
    return v;
}

std::vector<double> FlowTrace::column(const std::string& name) const {
    auto cols = columns();
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw std::out_of_range("no trace column '" + name + "'");
    auto idx = static_cast<std::size_t>(it - cols.begin());
    std::vector<double> out;
    for (const auto& r : records) out.push_back(row(r)[idx]);
    return out;
}

}  // namespace conicflow
