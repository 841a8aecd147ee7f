#pragma once

#include <string>
#include <vector>

#include "conicflow/metric.hpp"

namespace conicflow {

struct RicciPotential {
    Field v;                             // Delta v = R - chi/2, int e^{-v} dg = 2
    double normalization_residual = 0.0; // |int e^{-v} dg - 2|
    double mean_correction = 0.0;        // constant removed from the Poisson right-hand side
};

/// Potential of g relative to the background: L phi = m - rho, int phi dg_bg = 0.
struct PotentialPair {
    Field phi;
    std::string gauge = "background";
    double mean_correction = 0.0;
};

class FunctionalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RicciPotential ricci_potential(const MetricState& m);
PotentialPair recover_potential(const MetricState& m);

/// F = 1/4 D(phi) - 1/2 int phi dg_bg - (2/chi) log int e^{-chi phi/2 + h} dg_bg.
double f_beta(const BackgroundMetric& bg, const Field& phi);
double f_beta(const MetricState& m);
/// Same with exponent chi/2 - eps_F in the log term and prefactor 1/(chi/2 - eps_F).
double f_beta_eps(const BackgroundMetric& bg, const Field& phi, double eps_f);
double f_beta_eps(const MetricState& m, double eps_f);
/// Instantaneous rate dF/dt along the flow: -1/2 int v (1 - e^{-v}) dg with Delta v = chi/2 - R.
double f_beta_dissipation(const MetricState& m);

/// int (tau (R + |grad f|^2) + f - 2) e^{-f} / (4 pi tau) dg.
double w_functional(const MetricState& m, const Field& f, double tau);

struct NormalizedW {
    double value = 0.0;
    double shift = 0.0;  // constant added to f to meet int e^{-f} dg = 2
};
/// int [(R + |grad f|^2)/chi + f] e^{-f} dg with f shifted onto the constraint.
NormalizedW normalized_w(const MetricState& m, const Field& f);
/// Convenience: normalized W at f = -v.
double normalized_w_at_potential(const MetricState& m);

struct MuEstimate {
    double value = 0.0;
    std::string tag = "upper-bound estimate";
    int iterations = 0;
    std::vector<double> history;
    Field f;
};
/// Constrained descent on the normalized W from f = -v; the value only decreases with budget.
MuEstimate mu_estimate(const MetricState& m, int budget);

/// int (R - s) log(R - s) dg; throws naming the node if R - s <= 0 somewhere.
double hamilton_entropy(const MetricState& m, double s);
/// Solution of ds/dt = s (s - half_chi), s(0) = s0.
double chow_shift(double s0, double t, double half_chi);

/// int |Hess v - (Delta v / 2) g|^2 dg by finite differences.
double soliton_residual(const MetricState& m);
double soliton_residual_of(const MetricState& m, const Field& v);

}  // namespace conicflow
