#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "conicflow/divisor.hpp"

namespace conicflow {

class PoissonSolver;

/// Cell-centered latitude-longitude grid on the unit sphere. Node (i, j) sits at colatitude
/// (i + 1/2) dtheta and longitude (j + 1/2) dphi. Quadrature weights are exact cell areas
/// divided by 2 pi, so they sum to 2 (the round area-2 sphere). A grid with one longitude
/// column is the axisymmetric reduction.
class SphereGrid {
public:
    struct Face {
        int a, b;
        double T;  // transmissibility: (face length / center distance) / (4 pi)
    };
    struct GraphEdge {
        int to;
        double length;  // round area-2 length of the straight segment between node centers
    };
    struct Placement {
        Vec3 requested;
        Vec3 placed;
        double offset = 0.0;  // great-circle angle moved, radians on the unit sphere
    };

    int n_lat() const { return n_lat_; }
    int n_lon() const { return n_lon_; }
    bool axisymmetric() const { return n_lon_ == 1; }
    int size() const { return n_lat_ * n_lon_; }
    int node(int i, int j) const { return i * n_lon_ + j; }
    int ring(int k) const { return k / n_lon_; }
    int column(int k) const { return k % n_lon_; }
    double dtheta() const { return dtheta_; }
    double dphi() const { return dphi_; }
    double theta(int i) const { return (i + 0.5) * dtheta_; }
    double phi(int j) const { return (j + 0.5) * dphi_; }
    double theta_of(int k) const { return theta(ring(k)); }
    double phi_of(int k) const { return phi(column(k)); }
    const Vec3& xyz(int k) const { return xyz_[k]; }
    double weight(int k) const { return w_[k]; }
    const std::vector<double>& weights() const { return w_; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<std::vector<GraphEdge>>& graph() const { return graph_; }
    /// Node whose cell contains the unit vector p.
    int cell_of(const Vec3& p) const;
    /// Nodes of the cell containing p and its neighbors, used to attach off-node points to the graph.
    std::vector<int> attachment_nodes(const Vec3& p) const;
    const std::vector<Placement>& placements() const { return placements_; }
    /// The divisor with positions moved off nodes where needed.
    const Divisor& placed_divisor() const { return placed_; }
    const PoissonSolver& poisson() const { return *poisson_; }
    /// Sparse stiffness matrix A with (A f)_a = sum_faces T (f_a - f_b).
    const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }
    /// Cell width in colatitude measured in the Fubini-Study section norm (sin(d/2) scale).
    double sigma_cell_width() const { return 0.5 * dtheta_; }

    friend std::shared_ptr<const SphereGrid> build_grid(int, int, const Divisor&);
    friend std::shared_ptr<const SphereGrid> build_axisymmetric_grid(int, const Divisor&);

private:
    SphereGrid() = default;
    void assemble();

    int n_lat_ = 0, n_lon_ = 0;
    double dtheta_ = 0.0, dphi_ = 0.0;
    std::vector<Vec3> xyz_;
    std::vector<double> w_;
    std::vector<Face> faces_;
    std::vector<std::vector<GraphEdge>> graph_;
    std::vector<Placement> placements_;
    Divisor placed_;
    Eigen::SparseMatrix<double> stiffness_;
    std::shared_ptr<const PoissonSolver> poisson_;
};

using GridPtr = std::shared_ptr<const SphereGrid>;

class GridError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

GridPtr build_grid(int n_lat, int n_lon, const Divisor& divisor);
/// One-column grid for rotationally symmetric runs; marked points must sit at the poles.
GridPtr build_axisymmetric_grid(int n_lat, const Divisor& divisor);

/// Solves the round-metric Poisson problem L f = rhs where (L f)_a = -(A f)_a / w_a.
/// The factorization is computed once per grid; solve() is const and thread-safe.
class PoissonSolver {
public:
    explicit PoissonSolver(const SphereGrid& grid);
    struct Result {
        std::vector<double> f;           // weighted mean zero
        double mean_correction = 0.0;    // constant removed from rhs to make it solvable
    };
    Result solve(const std::vector<double>& rhs) const;

private:
    int n_ = 0;
    std::vector<double> w_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// (L f)_a = (1/w_a) sum_faces T (f_b - f_a): the round-metric Laplacian in calibrated units.
std::vector<double> round_laplacian(const SphereGrid& g, const std::vector<double>& f);
/// sum_faces T (f_a - f_b)^2 = integral of |grad f|^2 in calibrated units (conformally invariant).
double dirichlet_energy(const SphereGrid& g, const std::vector<double>& f);
double dirichlet_pairing(const SphereGrid& g, const std::vector<double>& f, const std::vector<double>& h);

}  // namespace conicflow
