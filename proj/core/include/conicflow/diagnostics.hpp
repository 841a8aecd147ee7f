#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conicflow/flow.hpp"
#include "conicflow/soliton.hpp"

namespace conicflow {

class DiagnosticsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct CurvatureStats {
    double min = 0.0, max = 0.0;
    double target_half_chi = 0.0;
    double target_cone = 0.0;          // 1 - beta_max
    double sup_dev_half_chi = 0.0;     // sup |R - chi/2| outside the excluded balls
    double sup_dev_cone = 0.0;         // sup |R - (1 - beta_max)| outside the excluded balls
    double full_sup_dev_half_chi = 0.0;  // same with the full smoothed curvature (carries the cone tails)
    double full_sup_dev_cone = 0.0;
    double excluded_area_fraction = 0.0;
    double exclusion = 0.0;
};

/// Regular curvature statistics outside section-norm balls sin(d/2) < exclusion at the marked points.
CurvatureStats curvature_stats(const MetricState& m, double exclusion);

struct Clusters {
    std::vector<std::vector<std::size_t>> groups;  // indices into the sorted divisor, each group ascending
    std::vector<std::vector<double>> distances;    // pairwise metric distances between marked points
    std::vector<std::vector<double>> between;      // single-linkage distance between groups
};

/// Single linkage: points closer than tol share a cluster.
Clusters marked_point_clusters(const MetricState& m, double tol);
/// Single linkage on ratios: i and j linked when d_ij < fraction * initial_ij.
Clusters marked_point_clusters_relative(const MetricState& m, const std::vector<double>& initial_pairs,
                                        double fraction);

/// Ball volume at p divided by the area of the same-radius ball in the model of constant
/// curvature 1 - beta_max (the round sphere when the divisor is empty).
double volume_ratio(const MetricState& m, const Vec3& p, double r);

/// RMS mismatch sqrt(1/2 int (R - R_profile(A))^2 dg) between regular curvature and the profile
/// curvature, both as functions of cumulative area A from the heaviest marked point.
double compare_to_profile(const MetricState& m, const RadialProfile& profile, const Clusters& clusters);
double compare_to_profile(const MetricState& m, const RadialProfile& profile);

/// Analytic football of weight beta with cone points at +-axis, sampled on the grid of `like`
/// with the same smoothing length.
MetricState football_control(const MetricState& like, const Vec3& axis, double beta);

enum class Verdict { ConstantCurvature, Football, Soliton, Undecided };
std::string to_string(Verdict v);

struct ConvergenceReport {
    Verdict verdict = Verdict::Undecided;
    StabilityClass stability = StabilityClass::Stable;
    CurvatureStats curvature;
    Clusters clusters;
    std::vector<std::size_t> observed_side_p, observed_side_q;  // soliton verdict: heavy and light sides
    std::optional<double> observed_beta_p, observed_beta_q;
    std::map<std::string, double> residuals;
    std::map<std::string, double> thresholds;
    std::vector<std::string> caveats;
    std::vector<std::string> reasons;  // why the verdict was (or was not) reached
};

/// Decision tree over the terminal state; thresholds come from the run configuration.
ConvergenceReport detect_convergence(const FlowTrace& trace, const MetricState& final_state, const Divisor& divisor,
                                     const FlowConfig& cfg);

}  // namespace conicflow
