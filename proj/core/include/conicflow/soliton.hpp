#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conicflow/divisor.hpp"

namespace conicflow {

/// Rotationally symmetric two-cone shrinking soliton in moment coordinates.
/// Orientation: the heavier cone beta_p sits at x = +1, so tau >= 0 and c >= 0.
struct SolitonSpec {
    double beta_p = 0.0;
    double beta_q = 0.0;
    double tau = 0.0;
    double c = 0.0;
    double w = 1.0;
    std::vector<std::size_t> side_p;
    std::vector<std::size_t> side_q;
};

double tau_of_c(double c);
double solve_c(double tau);
double f_of_c(double c);
double soliton_w(double beta_p, double beta_q);
SolitonSpec make_soliton_spec(double beta_p, double beta_q);

struct MuTable {
    std::vector<SolitonSpec> rows;        // valid partitions, W descending
    std::vector<LimitDivisor> excluded;   // partitions with a side weight >= 1
    std::optional<double> threshold;      // second largest W, when it exists
    bool top_is_heaviest_alone = true;    // first row has I = {k}
    std::vector<std::string> warnings;
};

MuTable mu_table(const Divisor& d);

/// Toric profile P(x) on the moment interval [-1,1]. The area measure is dx, so the total area
/// is 2; curvature R = -P'', |grad f|^2 = P f'^2, and the cone weight at x = +-1 is 1 - |P'(+-1)|.
struct RadialProfile {
    double beta_plus = 0.0;   // weight at x = +1
    double beta_minus = 0.0;  // weight at x = -1
    double c = 0.0;
    double lambda = 1.0;      // constant curvature part 1 - (beta_plus + beta_minus)/2
    std::vector<double> x, phi, R, theta;

    double P(double x) const;
    double dP(double x) const;
    double curvature(double x) const { return lambda + c * dP(x); }
    double potential(double x) const;
    /// Cumulative area measured from the x = +1 end, in [0, 2].
    static double area_from_plus_end(double x) { return 1.0 - x; }
};

RadialProfile soliton_profile(double beta_p, double beta_q, int n = 257);
RadialProfile football(double beta, int n = 257);

/// Integrals over the profile by adaptive Gauss-Kronrod quadrature.
double profile_normalized_w(const RadialProfile& p);
double profile_theta_entropy(const RadialProfile& p);
double profile_total_curvature(const RadialProfile& p);

/// Moment coordinate x as a function of s = log tan(angle/2) measured from the x = +1 end,
/// with x(0) = x_equator. Tabulated on an s-grid and interpolated.
class ProfileEmbedding {
public:
    ProfileEmbedding(const RadialProfile& p, double x_equator = 0.0);
    /// Moment coordinate at angular distance `angle` from the x = +1 pole.
    double moment_at(double angle) const;
    /// Area density relative to the round area-2 metric: 2P(x)/sin^2(angle).
    double density_at(double angle) const;

private:
    /// One RK4 step of dx/ds = -2 P(x); smooth in h, so evaluating between table nodes keeps x(s) smooth.
    double advance(double x, double h) const;
    RadialProfile profile_;
    double s_min_, ds_;
    std::vector<double> table_;
};

}  // namespace conicflow
