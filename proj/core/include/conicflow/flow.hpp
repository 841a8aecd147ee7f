#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conicflow/divisor.hpp"
#include "conicflow/metric.hpp"

namespace conicflow {

enum class Stepper { SemiImplicit, RK2 };
enum class Gauge { None, CenterOfMass };
enum class InitialKind { Zero, Bump, File };
/// Two algebraically equal right-hand sides of the conformal factor equation.
enum class RhsForm { Curvature, Expanded };

struct FlowConfig {
    Divisor divisor;
    int n_lat = 64;
    int n_lon = 128;
    bool axisymmetric = false;
    double epsilon = 0.05;
    double dt = 0.02;          // largest step; the stepper may take smaller ones
    double t_max = 50.0;
    int renormalize_every = 1;
    Stepper stepper = Stepper::SemiImplicit;
    RhsForm rhs_form = RhsForm::Curvature;
    double cfl = 0.9;          // fraction of the explicit diffusion bound (rk2)
    double reaction_cfl = 0.5; // dt * max R stays below this
    Gauge gauge = Gauge::None;
    double gauge_relax_time = 1.0;
    InitialKind initial = InitialKind::Zero;
    double bump_amplitude = 0.3;
    double bump_width = 0.5;   // radians on the unit sphere
    std::string initial_file;
    std::uint64_t seed = 1;
    double sample_every = 0.5;
    double snapshot_every = 0.0;  // 0: final snapshot only
    double eps_f = 0.05;
    double chow_margin = 0.05;
    double ratio_radius = 0.2;
    int mu_budget = 30;
    bool auto_stop = false;
    double auto_stop_tol = 1e-7;
    // Report thresholds.
    double exclusion = 0.15;        // section-norm radius excluded around marked points
    double curvature_tol = 5e-2;
    double cluster_fraction = 0.1;  // merge when distance < fraction * initial distance
    double residual_floor_factor = 3.0;
    double w_tol = 5e-2;
    double profile_tol = 1e-1;
};

struct TraceRecord {
    double t = 0.0;
    long step = 0;
    double dt = 0.0;
    double area = 0.0;
    double max_area_error = 0.0;    // max |area - 2| after renormalization since last sample
    double max_drift = 0.0;         // max |renormalization constant| since last sample
    double int_R = 0.0;             // full smooth curvature integral (Gauss-Bonnet)
    double int_R_reg = 0.0;
    double min_R = 0.0, max_R = 0.0;   // regular curvature, whole sphere
    double sup_abs_R = 0.0;            // running max of sup |R|
    double sup_dev = 0.0;              // sup |R - chi/2| away from marked points
    double f_beta = 0.0;
    double f_beta_rate = 0.0;          // -1/2 int v (1 - e^{-v}) dg
    double f_beta_eps_combo = 0.0;     // F_{beta} + eps_F * Dirichlet
    double f_violation = 0.0;          // max per-step increase of F since last sample
    double hamilton_n = 0.0;
    double chow_s = 0.0;
    double n_violation = 0.0;          // max per-step increase of N since last sample
    double normalized_w = 0.0;         // at f = -v
    double soliton_residual = 0.0;
    double diameter = 0.0;
    double gauge_speed = 0.0;
    std::vector<double> distances;     // pairs (i<j) in lexicographic order
    std::vector<double> volume_ratios; // per marked point
    std::vector<Vec3> positions;
};

struct FlowTrace {
    std::size_t k = 0;
    std::vector<TraceRecord> records;
    std::vector<std::string> columns() const;
    std::vector<double> row(const TraceRecord& r) const;
    std::vector<double> column(const std::string& name) const;
};

struct FlowResult {
    FlowTrace trace;
    MetricState final_state;
    bool complete = true;
    std::string failure;
    double initial_mu = 0.0;
    double final_mu = 0.0;
    double chow_s0 = 0.0;
    long steps = 0;
    double max_area_error = 0.0;
    double max_f_violation = 0.0;
    double max_n_violation = 0.0;
    double sup_abs_R = 0.0;
    bool auto_stopped = false;
};

class FlowError : public std::runtime_error {
public:
    FlowError(const std::string& what, std::optional<MetricState> last_good = std::nullopt)
        : std::runtime_error(what), last_good(std::move(last_good)) {}
    std::optional<MetricState> last_good;
};

/// Right-hand side du/dt without gauge terms.
Field flow_rhs(const MetricState& m, RhsForm form = RhsForm::Curvature);
/// Largest dt the explicit scheme accepts on this state.
double explicit_dt_bound(const MetricState& m, double cfl = 0.9);

/// Stateful integrator: owns the factorization workspace and the gauge bookkeeping.
class FlowStepper {
public:
    FlowStepper(const FlowConfig& cfg, MetricState initial);
    /// Advances by at most dt (clipped by the stability bounds); returns the dt used.
    double advance(double dt_max);
    const MetricState& state() const { return state_; }
    /// F_beta of the current metric against the original reference, including the gauge cocycle.
    double f_beta_total() const;
    double gauge_speed() const { return gauge_speed_; }
    double last_drift() const { return last_drift_; }
    double cocycle() const { return cocycle_; }

private:
    struct Gauge3 {
        Vec3 V{0, 0, 0};
    };
    Gauge3 gauge_field(const Field& R_reg) const;
    void rebuild_background(const std::vector<Vec3>& positions);

    FlowConfig cfg_;
    MetricState state_;
    long step_count_ = 0;
    double gauge_speed_ = 0.0;
    double last_drift_ = 0.0;
    double cocycle_ = 0.0;
    struct Workspace;
    std::shared_ptr<Workspace> ws_;
};

/// One explicit or semi-implicit step with no gauge (unit tests, benchmarks).
MetricState step(const MetricState& m, double dt, Stepper stepper = Stepper::RK2, RhsForm form = RhsForm::Curvature);

MetricState make_initial_state(const FlowConfig& cfg);
GridPtr make_grid(const FlowConfig& cfg);

struct RunHooks {
    std::function<void(const MetricState&)> snapshot;
    std::function<void(const TraceRecord&)> sample;
};

FlowResult run(const FlowConfig& cfg, const RunHooks& hooks = {});
/// Rotationally symmetric reduction: one-column grid, marked points at the poles.
FlowResult run_axisymmetric(const FlowConfig& cfg, const RunHooks& hooks = {});

/// Monitored quantities for one state (used by run and by the report command).
TraceRecord measure(const MetricState& m, const FlowConfig& cfg, double chow_s);

}  // namespace conicflow
