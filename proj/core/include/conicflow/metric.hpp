#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "conicflow/divisor.hpp"
#include "conicflow/grid.hpp"

namespace conicflow {

using Field = std::vector<double>;

/// Conversion factors between the calibrated units and Riemannian quantities on the
/// sphere of area 2. R = curvature_scale * K_gauss, Delta = laplacian_scale * Delta_LB,
/// |grad f|^2 = gradient_scale * |grad f|^2_riemannian.
struct UnitConstants {
    double total_area = 2.0;
    double round_radius = 0.0;
    double curvature_scale = 0.0;
    double laplacian_scale = 0.0;
    double gradient_scale = 0.0;
    double round_curvature_error = 0.0;
    double ibp_residual = 0.0;
    double conformal_identity_error = 0.0;
};

/// Runs the calibration self-tests once; throws if any fails.
UnitConstants calibrate_units();
/// Cached result of calibrate_units().
const UnitConstants& unit_constants();

/// Smoothed conical background g_bg = rho * g_round with rho proportional to
/// prod_j (s_j + eps^2)^(-beta_j), s_j = (1 - x.p_j)/2, normalized to area 2.
struct BackgroundMetric {
    GridPtr grid;
    Divisor divisor;
    double epsilon = 0.0;
    double chi = 2.0;
    double log_norm = 0.0;
    Field rho;
    Field log_rho;
    Field curvature;     // full smooth curvature (1 - L log rho) / rho
    Field cone_density;  // sum_j beta_j b_j per round area, b_j the smoothed delta of mass one
    Field h;             // Ricci potential of the background: L h = chi/2 (1 - rho), int e^h dg_bg = 2
    double half_chi() const { return 0.5 * chi; }
};

using BackgroundPtr = std::shared_ptr<const BackgroundMetric>;

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Builds the background for the grid's placed divisor, or for `divisor` when given
/// (used when marked points move between steps).
BackgroundPtr background_metric(const GridPtr& grid, double epsilon);
BackgroundPtr background_metric(const GridPtr& grid, const Divisor& divisor, double epsilon);

/// log(s + eps^2) per marked point.
double section_log(const Vec3& x, const Vec3& p, double epsilon);
/// Unit-sphere tangent gradient of log rho at x (analytic).
Vec3 log_density_gradient(const BackgroundMetric& bg, const Vec3& x);

struct MetricState {
    BackgroundPtr background;
    Field u;
    double t = 0.0;

    const SphereGrid& grid() const { return *background->grid; }
    int size() const { return static_cast<int>(u.size()); }
    /// Area density relative to the round area-2 metric.
    double density(int a) const;
    Field densities() const;
};

MetricState initial_state(const BackgroundPtr& bg);
/// State for a conical metric given by its log area density (relative to the round area-2 metric)
/// at each node. The exact cone factors are swapped for the smoothed ones, so u = log density +
/// sum_j beta_j log s_j is smooth across the marked points; the result is renormalized to area 2.
MetricState conical_state(const BackgroundPtr& bg, const std::function<double(int)>& log_density);

Field laplacian(const Field& f, const MetricState& m);
Field scalar_curvature(const MetricState& m);
/// Curvature with the smoothed cone masses removed: (chi/2 - L u) / (rho e^u).
Field regular_curvature(const MetricState& m);
double integrate(const Field& f, const MetricState& m);
double area(const MetricState& m);
/// Nodal |grad f|^2 whose integral equals the Dirichlet energy exactly.
Field gradient_sq(const Field& f, const MetricState& m);
/// Adds the constant restoring area 2; returns that constant.
double renormalize(MetricState& m);

}  // namespace conicflow
