#include "conicflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace conicflow {

namespace {

constexpr double kPi = std::numbers::pi;
const double kRoundRadius = 1.0 / std::sqrt(2.0 * kPi);  // area-2 sphere
constexpr double kCoincidence = 1e-9;

double wrap_phi(double phi) {
    phi = std::fmod(phi, 2.0 * kPi);
    return phi < 0.0 ? phi + 2.0 * kPi : phi;
}

Vec3 from_angles(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

}  // namespace

int SphereGrid::cell_of(const Vec3& p) const {
    double th = std::acos(std::clamp(p[2], -1.0, 1.0));
    double ph = wrap_phi(std::atan2(p[1], p[0]));
    int i = std::min(static_cast<int>(th / dtheta_), n_lat_ - 1);
    int j = std::min(static_cast<int>(ph / dphi_), n_lon_ - 1);
    return node(i, j);
}

std::vector<int> SphereGrid::attachment_nodes(const Vec3& p) const {
    int c = cell_of(p);
    std::vector<int> out{c};
    for (const auto& e : graph_[c]) out.push_back(e.to);
    return out;
}

void SphereGrid::assemble() {
    const int n = size();
    dtheta_ = kPi / n_lat_;
    dphi_ = 2.0 * kPi / n_lon_;
    xyz_.resize(n);
    w_.resize(n);
    for (int i = 0; i < n_lat_; ++i) {
        double area = (std::cos(i * dtheta_) - std::cos((i + 1) * dtheta_)) * dphi_ / (2.0 * kPi);
        for (int j = 0; j < n_lon_; ++j) {
            xyz_[node(i, j)] = from_angles(theta(i), phi(j));
            w_[node(i, j)] = area;
        }
    }

    const double inv4pi = 1.0 / (4.0 * kPi);
    if (n_lon_ > 1) {
        for (int i = 0; i < n_lat_; ++i) {
            double T = dtheta_ / (std::sin(theta(i)) * dphi_) * inv4pi;
            for (int j = 0; j < n_lon_; ++j) faces_.push_back({node(i, j), node(i, (j + 1) % n_lon_), T});
        }
    }
    for (int i = 0; i + 1 < n_lat_; ++i) {
        double T = std::sin((i + 1) * dtheta_) * dphi_ / dtheta_ * inv4pi;
        for (int j = 0; j < n_lon_; ++j) faces_.push_back({node(i, j), node(i + 1, j), T});
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * faces_.size());
    for (const auto& f : faces_) {
        trip.emplace_back(f.a, f.a, f.T);
        trip.emplace_back(f.b, f.b, f.T);
        trip.emplace_back(f.a, f.b, -f.T);
        trip.emplace_back(f.b, f.a, -f.T);
    }
    stiffness_.resize(n, n);
    stiffness_.setFromTriplets(trip.begin(), trip.end());

    // Eight-neighbor graph, plus a straight path across each pole.
    graph_.assign(n, {});
    auto link = [&](int a, int b) {
        if (a == b) return;
        for (const auto& e : graph_[a])
            if (e.to == b) return;
        double len = angle_between(xyz_[a], xyz_[b]) * kRoundRadius;
        graph_[a].push_back({b, len});
        graph_[b].push_back({a, len});
    };
    for (int i = 0; i < n_lat_; ++i) {
        for (int j = 0; j < n_lon_; ++j) {
            int a = node(i, j);
            if (n_lon_ > 1) link(a, node(i, (j + 1) % n_lon_));
            if (i + 1 < n_lat_) {
                link(a, node(i + 1, j));
                if (n_lon_ > 1) {
                    link(a, node(i + 1, (j + 1) % n_lon_));
                    link(a, node(i + 1, (j + n_lon_ - 1) % n_lon_));
                }
            }
        }
    }
    if (n_lon_ > 1 && n_lon_ % 2 == 0) {
        for (int j = 0; j < n_lon_ / 2; ++j) {
            link(node(0, j), node(0, j + n_lon_ / 2));
            link(node(n_lat_ - 1, j), node(n_lat_ - 1, j + n_lon_ / 2));
        }
    }
    poisson_ = std::make_shared<PoissonSolver>(*this);
}

GridPtr build_grid(int n_lat, int n_lon, const Divisor& divisor) {
    if (n_lat < 16 || n_lon < 32)
        throw GridError("grid resolution too small: need n_lat >= 16 and n_lon >= 32, got " +
                        std::to_string(n_lat) + "x" + std::to_string(n_lon));
    auto g = std::shared_ptr<SphereGrid>(new SphereGrid());
    g->n_lat_ = n_lat;
    g->n_lon_ = n_lon;
    g->assemble();

    std::vector<Vec3> placed;
    std::vector<int> cells;
    for (std::size_t m = 0; m < divisor.k(); ++m) {
        Vec3 p = divisor.position(m);
        SphereGrid::Placement pl{p, p, 0.0};
        int c = g->cell_of(p);
        if (angle_between(p, g->xyz(c)) < kCoincidence) {
            double th = std::acos(std::clamp(p[2], -1.0, 1.0));
            double ph = std::atan2(p[1], p[0]);
            th += th < 0.5 * kPi ? 0.25 * g->dtheta() : -0.25 * g->dtheta();
            pl.placed = from_angles(th, ph);
            pl.offset = angle_between(p, pl.placed);
            c = g->cell_of(pl.placed);
        }
        if (std::find(cells.begin(), cells.end(), c) != cells.end())
            throw GridError("two marked points fall inside one grid cell; refine the grid");
        cells.push_back(c);
        placed.push_back(pl.placed);
        g->placements_.push_back(pl);
    }
    g->placed_ = divisor.k() ? divisor.with_positions(placed) : divisor;
    return g;
}

GridPtr build_axisymmetric_grid(int n_lat, const Divisor& divisor) {
    if (n_lat < 16) throw GridError("axisymmetric grid needs n_lat >= 16");
    if (divisor.k() > 2) throw GridError("axisymmetric runs allow at most two marked points");
    bool north = false, south = false;
    for (const auto& p : divisor.positions()) {
        if (std::abs(p[2] - 1.0) < 1e-12 && !north) north = true;
        else if (std::abs(p[2] + 1.0) < 1e-12 && !south) south = true;
        else throw GridError("axisymmetric runs need marked points at distinct poles");
    }
    auto g = std::shared_ptr<SphereGrid>(new SphereGrid());
    g->n_lat_ = n_lat;
    g->n_lon_ = 1;
    g->assemble();
    for (const auto& p : divisor.positions()) g->placements_.push_back({p, p, 0.0});
    g->placed_ = divisor;
    return g;
}

PoissonSolver::PoissonSolver(const SphereGrid& grid) : n_(grid.size()), w_(grid.weights()) {
    // Pin the last node to remove the constant kernel.
    Eigen::SparseMatrix<double> reduced = grid.stiffness().topLeftCorner(n_ - 1, n_ - 1);
    ldlt_.compute(reduced);
    if (ldlt_.info() != Eigen::Success) throw std::runtime_error("Poisson factorization failed");
}

PoissonSolver::Result PoissonSolver::solve(const std::vector<double>& rhs) const {
    Result r;
    double total_w = 0.0, mean = 0.0;
    for (int a = 0; a < n_; ++a) {
        mean += w_[a] * rhs[a];
        total_w += w_[a];
    }
    mean /= total_w;
    r.mean_correction = mean;
    Eigen::VectorXd b(n_ - 1);
    for (int a = 0; a < n_ - 1; ++a) b[a] = -w_[a] * (rhs[a] - mean);
    Eigen::VectorXd z = ldlt_.solve(b);
    if (ldlt_.info() != Eigen::Success) throw std::runtime_error("Poisson solve failed");
    r.f.assign(n_, 0.0);
    double avg = 0.0;
    for (int a = 0; a < n_ - 1; ++a) {
        r.f[a] = z[a];
        avg += w_[a] * z[a];
    }
    avg /= total_w;
    for (auto& v : r.f) v -= avg;
    return r;
}

std::vector<double> round_laplacian(const SphereGrid& g, const std::vector<double>& f) {
    std::vector<double> out(g.size(), 0.0);
    for (const auto& fc : g.faces()) {
        double flux = fc.T * (f[fc.b] - f[fc.a]);
        out[fc.a] += flux;
        out[fc.b] -= flux;
    }
    for (int a = 0; a < g.size(); ++a) out[a] /= g.weight(a);
    return out;
}

double dirichlet_energy(const SphereGrid& g, const std::vector<double>& f) {
    double e = 0.0;
    for (const auto& fc : g.faces()) {
        double d = f[fc.a] - f[fc.b];
        e += fc.T * d * d;
    }
    return e;
}

double dirichlet_pairing(const SphereGrid& g, const std::vector<double>& f, const std::vector<double>& h) {
    double e = 0.0;
    for (const auto& fc : g.faces()) e += fc.T * (f[fc.a] - f[fc.b]) * (h[fc.a] - h[fc.b]);
    return e;
}

}  // namespace conicflow
