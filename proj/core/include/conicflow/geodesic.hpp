#pragma once

#include <vector>

#include "conicflow/metric.hpp"

namespace conicflow {

/// Shortest-path distances on the eight-neighbor grid graph. Edge lengths are round lengths
/// scaled by the mean of sqrt(density) at the two ends, so they upper-bound the true distance.
class DistanceField {
public:
    /// Distances from the point p (attached to the nodes around its cell).
    DistanceField(const MetricState& m, const Vec3& p);
    /// Distances from a node.
    DistanceField(const MetricState& m, int source_node);

    double at_node(int a) const { return dist_[a]; }
    const std::vector<double>& nodes() const { return dist_; }
    /// Distance to an arbitrary point, through its attachment nodes.
    double to_point(const Vec3& q) const;

private:
    void run(std::vector<std::pair<int, double>> seeds);
    const MetricState* state_;
    Vec3 source_{0.0, 0.0, 0.0};
    bool has_point_source_ = false;
    std::vector<double> scale_;
    std::vector<double> dist_;
};

double geodesic_distance(const MetricState& m, const Vec3& a, const Vec3& b);
/// Area of the metric ball {x : d(center, x) <= r}, summed over nodes.
double ball_volume(const MetricState& m, const Vec3& center, double r);
/// Lower estimate of the diameter by a double sweep.
double diameter_estimate(const MetricState& m);

}  // namespace conicflow
