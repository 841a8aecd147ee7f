#include "conicflow/divisor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace conicflow {

namespace {

bool in_open_unit(const Weight& w) {
    if (w.exact) return *w.exact > Rational(0) && *w.exact < Rational(1);
    return w.value > 0.0 && w.value < 1.0;
}

}  // namespace

Weight Weight::parse(const std::string& text) {
    auto slash = text.find('/');
    try {
        if (slash == std::string::npos) {
            std::size_t used = 0;
            double v = std::stod(text, &used);
            if (used != text.size()) throw DivisorError("trailing characters in weight '" + text + "'");
            return Weight(v);
        }
        std::size_t used = 0;
        long long num = std::stoll(text.substr(0, slash), &used);
        if (used != slash) throw DivisorError("bad numerator in weight '" + text + "'");
        std::string den_text = text.substr(slash + 1);
        long long den = std::stoll(den_text, &used);
        if (used != den_text.size()) throw DivisorError("bad denominator in weight '" + text + "'");
        if (den == 0) throw DivisorError("zero denominator in weight '" + text + "'");
        return Weight(Rational(num, den));
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const DivisorError*>(&e)) throw;
        throw DivisorError("cannot parse weight '" + text + "'");
    }
}

std::string Weight::to_string() const {
    if (exact) {
        std::ostringstream os;
        os << exact->numerator() << "/" << exact->denominator();
        return os.str();
    }
    // Shortest text that parses back to the same double.
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string to_string(StabilityClass c) {
    switch (c) {
        case StabilityClass::Stable: return "Stable";
        case StabilityClass::SemiStable: return "SemiStable";
        case StabilityClass::Unstable: return "Unstable";
    }
    return "?";
}

Vec3 normalized(const Vec3& v) {
    double n = std::sqrt(dot(v, v));
    if (!(n > 0.0) || !std::isfinite(n)) throw DivisorError("position is not a nonzero finite vector");
    return {v[0] / n, v[1] / n, v[2] / n};
}

double angle_between(const Vec3& a, const Vec3& b) {
    // atan2 form stays accurate for nearly equal and nearly antipodal points.
    Vec3 c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    return std::atan2(std::sqrt(dot(c, c)), dot(a, b));
}

Divisor::Divisor(std::vector<Weight> weights, std::vector<Vec3> positions) {
    if (weights.size() != positions.size())
        throw DivisorError("divisor has " + std::to_string(weights.size()) + " weights but " +
                           std::to_string(positions.size()) + " positions");
    for (const auto& w : weights) {
        if (!in_open_unit(w)) throw DivisorError("weight " + w.to_string() + " is outside (0,1)");
    }
    for (auto& p : positions) p = normalized(p);
    for (std::size_t a = 0; a < positions.size(); ++a)
        for (std::size_t b = a + 1; b < positions.size(); ++b)
            if (angle_between(positions[a], positions[b]) <= 0.0)
                throw DivisorError("marked points " + std::to_string(a) + " and " + std::to_string(b) +
                                   " coincide");

    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a].value < weights[b].value; });
    for (auto i : order) {
        weights_.push_back(weights[i]);
        positions_.push_back(positions[i]);
        source_index_.push_back(i);
    }
}

double Divisor::weight_sum() const {
    double s = 0.0;
    for (const auto& w : weights_) s += w.value;
    return s;
}

bool Divisor::all_exact() const {
    return std::all_of(weights_.begin(), weights_.end(), [](const Weight& w) { return w.exact.has_value(); });
}

std::optional<Rational> Divisor::exact_weight_sum() const {
    if (!all_exact()) return std::nullopt;
    Rational s(0);
    for (const auto& w : weights_) s += *w.exact;
    return s;
}

Divisor Divisor::with_positions(const std::vector<Vec3>& positions) const {
    if (positions.size() != positions_.size()) throw DivisorError("position count mismatch");
    Divisor d = *this;
    for (std::size_t j = 0; j < positions.size(); ++j) d.positions_[j] = normalized(positions[j]);
    return d;
}

Divisor Divisor::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DivisorError(std::string("divisor JSON parse error: ") + e.what());
    }
    if (!j.is_object() || !j.contains("weights") || !j.contains("positions"))
        throw DivisorError("divisor JSON must be an object with \"weights\" and \"positions\"");
    std::vector<Weight> weights;
    for (const auto& w : j.at("weights")) {
        if (w.is_string()) weights.push_back(Weight::parse(w.get<std::string>()));
        else if (w.is_number()) weights.push_back(Weight(w.get<double>()));
        else throw DivisorError("weights must be numbers or \"num/den\" strings");
    }
    std::vector<Vec3> positions;
    for (const auto& p : j.at("positions")) {
        if (!p.is_array() || p.size() != 3) throw DivisorError("each position must be [x,y,z]");
        Vec3 v{};
        for (int a = 0; a < 3; ++a) {
            if (!p[a].is_number()) throw DivisorError("position coordinates must be numbers");
            v[a] = p[a].get<double>();
        }
        positions.push_back(v);
    }
    return Divisor(std::move(weights), std::move(positions));
}

Divisor Divisor::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DivisorError("cannot open divisor file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string Divisor::to_json_text() const {
    nlohmann::json j;
    j["weights"] = nlohmann::json::array();
    j["positions"] = nlohmann::json::array();
    for (std::size_t i = 0; i < k(); ++i) {
        if (weights_[i].exact) j["weights"].push_back(weights_[i].to_string());
        else j["weights"].push_back(weights_[i].value);
        j["positions"].push_back({positions_[i][0], positions_[i][1], positions_[i][2]});
    }
    return j.dump();
}

double euler_characteristic(const Divisor& d) { return 2.0 - d.weight_sum(); }

StabilityClass classify_stability(const Divisor& d, double float_tolerance) {
    if (d.empty()) throw DivisorError("classification needs at least one marked point");
    if (auto s = d.exact_weight_sum()) {
        Rational two_max = 2 * *d.weights().back().exact;
        if (*s >= Rational(2) || two_max < *s) return StabilityClass::Stable;
        if (two_max == *s) return StabilityClass::SemiStable;
        return StabilityClass::Unstable;
    }
    double s = d.weight_sum();
    double two_max = 2.0 * d.beta_max();
    if (s >= 2.0) return StabilityClass::Stable;
    if (std::abs(two_max - s) < float_tolerance) return StabilityClass::SemiStable;
    return two_max < s ? StabilityClass::Stable : StabilityClass::Unstable;
}

double alpha_invariant(const Divisor& d) {
    double chi = euler_characteristic(d);
    if (!(chi > 0.0)) throw DivisorError("alpha invariant formula needs weight sum below 2");
    return (1.0 - d.beta_max()) / chi;
}

std::vector<LimitDivisor> enumerate_partitions(const Divisor& d) {
    std::vector<LimitDivisor> out;
    const std::size_t k = d.k();
    if (k == 0) return out;
    // Fix the last index on side I to enumerate unordered splits exactly once.
    const std::uint64_t count = std::uint64_t{1} << (k - 1);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        std::vector<std::size_t> side_a{k - 1}, side_b;
        double sum_a = d.weight(k - 1), sum_b = 0.0;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            if (mask & (std::uint64_t{1} << i)) {
                side_a.push_back(i);
                sum_a += d.weight(i);
            } else {
                side_b.push_back(i);
                sum_b += d.weight(i);
            }
        }
        std::sort(side_a.begin(), side_a.end());
        LimitDivisor ld;
        if (sum_a >= sum_b) {
            ld.beta_p = sum_a, ld.beta_q = sum_b, ld.side_p = side_a, ld.side_q = side_b;
        } else {
            ld.beta_p = sum_b, ld.beta_q = sum_a, ld.side_p = side_b, ld.side_q = side_a;
        }
        ld.valid = ld.beta_p < 1.0;
        out.push_back(std::move(ld));
    }
    return out;
}

std::vector<std::string> theorem_warnings(const Divisor& d) {
    std::vector<std::string> w;
    if (d.k() < 3) w.push_back("fewer than three marked points: limit theorems are stated for k >= 3");
    return w;
}

LimitDivisor predict_limit_divisor(const Divisor& d) {
    auto cls = classify_stability(d);
    if (cls == StabilityClass::Stable)
        throw DivisorError("stable divisor: the limit keeps all marked points, no two-point limit");
    LimitDivisor ld;
    const std::size_t k = d.k();
    ld.side_p = {k - 1};
    for (std::size_t i = 0; i + 1 < k; ++i) ld.side_q.push_back(i);
    ld.beta_p = d.beta_max();
    ld.beta_q = d.weight_sum() - d.beta_max();
    if (cls == StabilityClass::SemiStable) {
        ld.beta_q = ld.beta_p;
    } else {
        ld.conditional = true;
        ld.warnings.push_back("conditional: valid when the initial entropy exceeds the second mu-table value");
    }
    auto extra = theorem_warnings(d);
    ld.warnings.insert(ld.warnings.end(), extra.begin(), extra.end());
    return ld;
}

}  // namespace conicflow
