#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace conicflow {

using Vec3 = std::array<double, 3>;
using Rational = boost::rational<std::int64_t>;

/// A cone weight. Keeps the exact rational when the user gave one.
struct Weight {
    double value = 0.0;
    std::optional<Rational> exact;

    Weight() = default;
    Weight(double v) : value(v) {}
    Weight(Rational r) : value(boost::rational_cast<double>(r)), exact(r) {}

    /// Parses "0.3", "3/10" or "-1e-2".
    static Weight parse(const std::string& text);
    std::string to_string() const;
};

enum class StabilityClass { Stable, SemiStable, Unstable };

std::string to_string(StabilityClass c);

class DivisorError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Marked points with cone weights, stored sorted ascending by weight.
class Divisor {
public:
    Divisor() = default;
    Divisor(std::vector<Weight> weights, std::vector<Vec3> positions);

    std::size_t k() const { return weights_.size(); }
    bool empty() const { return weights_.empty(); }
    const std::vector<Weight>& weights() const { return weights_; }
    const std::vector<Vec3>& positions() const { return positions_; }
    /// Index in the caller's original ordering for each sorted slot.
    const std::vector<std::size_t>& source_index() const { return source_index_; }

    double weight(std::size_t j) const { return weights_[j].value; }
    const Vec3& position(std::size_t j) const { return positions_[j]; }
    double beta_max() const { return weights_.empty() ? 0.0 : weights_.back().value; }
    double weight_sum() const;
    /// Exact sum when every weight is rational.
    std::optional<Rational> exact_weight_sum() const;
    bool all_exact() const;

    /// Same weights, new positions (re-normalized to the unit sphere).
    Divisor with_positions(const std::vector<Vec3>& positions) const;

    static Divisor from_json_text(const std::string& text);
    static Divisor from_file(const std::string& path);
    std::string to_json_text() const;

private:
    std::vector<Weight> weights_;
    std::vector<Vec3> positions_;
    std::vector<std::size_t> source_index_;
};

/// A two-point limit divisor produced by splitting the marked points into I and J.
struct LimitDivisor {
    double beta_p = 0.0;
    double beta_q = 0.0;
    std::vector<std::size_t> side_p;  // sorted indices whose weights sum to beta_p
    std::vector<std::size_t> side_q;
    bool valid = true;
    bool conditional = false;
    std::vector<std::string> warnings;
};

double euler_characteristic(const Divisor& d);
StabilityClass classify_stability(const Divisor& d, double float_tolerance = 1e-12);
double alpha_invariant(const Divisor& d);
std::vector<LimitDivisor> enumerate_partitions(const Divisor& d);
LimitDivisor predict_limit_divisor(const Divisor& d);

/// Warnings for operations whose statements assume at least three points.
std::vector<std::string> theorem_warnings(const Divisor& d);

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 normalized(const Vec3& v);
/// Great-circle angle between unit vectors.
double angle_between(const Vec3& a, const Vec3& b);

}  // namespace conicflow
