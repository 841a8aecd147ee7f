#include "conicflow/geodesic.hpp"

#include <cmath>
#include <limits>
#include <queue>

namespace conicflow {

namespace {

const double kRoundRadius = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);

}  // namespace

DistanceField::DistanceField(const MetricState& m, const Vec3& p) : state_(&m) {
    scale_.resize(m.size());
    for (int a = 0; a < m.size(); ++a) scale_[a] = std::sqrt(m.density(a));
    source_ = p;
    has_point_source_ = true;
    std::vector<std::pair<int, double>> seeds;
    for (int a : m.grid().attachment_nodes(p))
        seeds.emplace_back(a, angle_between(p, m.grid().xyz(a)) * kRoundRadius * scale_[a]);
    run(std::move(seeds));
}

DistanceField::DistanceField(const MetricState& m, int source_node) : state_(&m) {
    scale_.resize(m.size());
    for (int a = 0; a < m.size(); ++a) scale_[a] = std::sqrt(m.density(a));
    run({{source_node, 0.0}});
}

void DistanceField::run(std::vector<std::pair<int, double>> seeds) {
    const auto& g = state_->grid();
    dist_.assign(g.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (auto [a, d] : seeds) {
        if (d < dist_[a]) {
            dist_[a] = d;
            pq.emplace(d, a);
        }
    }
    const auto& graph = g.graph();
    while (!pq.empty()) {
        auto [d, a] = pq.top();
        pq.pop();
        if (d > dist_[a]) continue;
        for (const auto& e : graph[a]) {
            double nd = d + e.length * 0.5 * (scale_[a] + scale_[e.to]);
            if (nd < dist_[e.to]) {
                dist_[e.to] = nd;
                pq.emplace(nd, e.to);
            }
        }
    }
}

double DistanceField::to_point(const Vec3& q) const {
    const auto& g = state_->grid();
    double best = std::numeric_limits<double>::infinity();
    auto nodes = g.attachment_nodes(q);
    for (int a : nodes) best = std::min(best, dist_[a] + angle_between(q, g.xyz(a)) * kRoundRadius * scale_[a]);
    if (has_point_source_) {
        double direct = angle_between(q, source_);
        if (direct < 1e-14) return 0.0;
        int c = g.cell_of(source_);
        for (int a : nodes)
            if (a == c) best = std::min(best, direct * kRoundRadius * scale_[c]);
    }
    return best;
}

double geodesic_distance(const MetricState& m, const Vec3& a, const Vec3& b) {
    if (angle_between(a, b) < 1e-14) return 0.0;
    return DistanceField(m, a).to_point(b);
}

double ball_volume(const MetricState& m, const Vec3& center, double r) {
    if (r <= 0.0) return 0.0;
    DistanceField df(m, center);
    double v = 0.0;
    for (int a = 0; a < m.size(); ++a)
        if (df.at_node(a) <= r) v += m.grid().weight(a) * m.density(a);
    return v;
}

double diameter_estimate(const MetricState& m) {
    DistanceField first(m, 0);
    int far = 0;
    for (int a = 0; a < m.size(); ++a)
        if (first.at_node(a) > first.at_node(far)) far = a;
    DistanceField second(m, far);
    double d = 0.0;
    for (int a = 0; a < m.size(); ++a) d = std::max(d, second.at_node(a));
    return d;
}

}  // namespace conicflow
