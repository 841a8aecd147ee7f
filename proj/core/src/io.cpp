#include "conicflow/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "conicflow/config.hpp"
#include "conicflow/metric.hpp"

#ifndef CONICFLOW_VERSION
#define CONICFLOW_VERSION "0.0.0"
#endif

namespace conicflow {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

nlohmann::json indices_1based(const std::vector<std::size_t>& v) {
    auto a = nlohmann::json::array();
    for (auto i : v) a.push_back(i + 1);
    return a;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string version_string() { return CONICFLOW_VERSION; }

void write_text(const std::string& path, const std::string& text) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trace_to_csv(const FlowTrace& trace) {
    std::ostringstream os;
    auto cols = trace.columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : trace.records) {
        auto row = trace.row(r);
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << num(row[i]);
        os << '\n';
    }
    return os.str();
}

FlowTrace trace_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty trace");
    auto cols = split(line, ',');
    FlowTrace tr;
    for (const auto& c : cols)
        if (c.rfind("vol_ratio_", 0) == 0) ++tr.k;
    if (cols != tr.columns()) throw IoError("trace header does not match the expected columns");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != cols.size()) throw IoError("trace row has " + std::to_string(f.size()) + " fields");
        std::vector<double> v;
        for (const auto& s : f) v.push_back(std::stod(s));
        TraceRecord r;
        std::size_t i = 0;
        for (double* p : {&r.t}) *p = v[i++];
        r.step = static_cast<long>(v[i++]);
        for (double* p : {&r.dt, &r.area, &r.max_area_error, &r.max_drift, &r.int_R, &r.int_R_reg, &r.min_R, &r.max_R,
                          &r.sup_abs_R, &r.sup_dev, &r.f_beta, &r.f_beta_rate, &r.f_beta_eps_combo, &r.f_violation,
                          &r.hamilton_n, &r.chow_s, &r.n_violation, &r.normalized_w, &r.soliton_residual, &r.diameter,
                          &r.gauge_speed})
            *p = v[i++];
        for (std::size_t n = 0; n < tr.k * (tr.k - (tr.k ? 1 : 0)) / 2; ++n) r.distances.push_back(v[i++]);
        for (std::size_t n = 0; n < tr.k; ++n) r.volume_ratios.push_back(v[i++]);
        tr.records.push_back(std::move(r));
    }
    return tr;
}

std::string field_to_csv(const SphereGrid& grid, const Field& f) {
    std::ostringstream os;
    os << "index,theta,phi,value\n";
    for (int a = 0; a < grid.size(); ++a)
        os << a << ',' << num(grid.theta_of(a)) << ',' << num(grid.phi_of(a)) << ',' << num(f[a]) << '\n';
    return os.str();
}

Field read_field(const std::string& path) {
    std::istringstream is(read_text(path));
    std::string line;
    Field out;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            try {
                std::stod(split(line, ',').back());
            } catch (const std::exception&) {
                continue;  // header
            }
        }
        auto f = split(line, ',');
        try {
            out.push_back(std::stod(f.back()));
        } catch (const std::exception&) {
            throw IoError("bad value in field file '" + path + "': " + line);
        }
    }
    return out;
}

void write_snapshot(const std::string& stem, const MetricState& m, const FlowConfig& cfg) {
    write_text(stem + ".csv", field_to_csv(m.grid(), m.u));
    nlohmann::json j;
    j["t"] = m.t;
    j["field"] = std::filesystem::path(stem + ".csv").filename().string();
    j["n_lat"] = m.grid().n_lat();
    j["n_lon"] = m.grid().n_lon();
    j["epsilon"] = m.background->epsilon;
    j["divisor"] = nlohmann::json::parse(m.background->divisor.to_json_text());
    j["config"] = config_to_text(cfg);
    write_text(stem + ".json", j.dump(2) + "\n");
}

MetricState load_snapshot(const std::string& sidecar_path, FlowConfig* cfg_out) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(sidecar_path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("snapshot sidecar: ") + e.what());
    }
    FlowConfig cfg = parse_config(j.at("config").get<std::string>());
    auto grid = make_grid(cfg);
    auto divisor = Divisor::from_json_text(j.at("divisor").dump());
    auto bg = background_metric(grid, divisor, j.at("epsilon").get<double>());
    MetricState s = initial_state(bg);
    auto dir = std::filesystem::path(sidecar_path).parent_path();
    s.u = read_field((dir / j.at("field").get<std::string>()).string());
    if (s.size() != grid->size()) throw IoError("snapshot field size does not match its grid");
    s.t = j.at("t").get<double>();
    if (cfg_out) *cfg_out = cfg;
    return s;
}

std::string report_to_json(const ConvergenceReport& r, const Divisor& d) {
    nlohmann::json j;
    j["verdict"] = to_string(r.verdict);
    j["stability"] = to_string(r.stability);
    j["weights"] = nlohmann::json::array();
    for (const auto& w : d.weights()) j["weights"].push_back(w.to_string());
    j["curvature"] = {{"min", r.curvature.min},
                      {"max", r.curvature.max},
                      {"target_half_chi", r.curvature.target_half_chi},
                      {"target_cone", r.curvature.target_cone},
                      {"sup_dev_half_chi", r.curvature.sup_dev_half_chi},
                      {"sup_dev_cone", r.curvature.sup_dev_cone},
                      {"full_sup_dev_half_chi", r.curvature.full_sup_dev_half_chi},
                      {"full_sup_dev_cone", r.curvature.full_sup_dev_cone},
                      {"excluded_area_fraction", r.curvature.excluded_area_fraction},
                      {"exclusion", r.curvature.exclusion}};
    j["clusters"] = nlohmann::json::array();
    for (const auto& g : r.clusters.groups) j["clusters"].push_back(indices_1based(g));
    j["cluster_distances"] = r.clusters.between;
    j["marked_point_distances"] = r.clusters.distances;
    if (r.observed_beta_p) {
        j["observed_partition"] = {{"side_p", indices_1based(r.observed_side_p)},
                                   {"side_q", indices_1based(r.observed_side_q)},
                                   {"beta_p", *r.observed_beta_p},
                                   {"beta_q", *r.observed_beta_q}};
    }
    j["residuals"] = nlohmann::json::object();
    for (const auto& [k, v] : r.residuals) j["residuals"][k] = json_number(v);
    j["thresholds"] = r.thresholds;
    j["caveats"] = r.caveats;
    j["reasons"] = r.reasons;
    return j.dump(2) + "\n";
}

std::string report_summary(const ConvergenceReport& r, const Divisor& d) {
    std::ostringstream os;
    os << "verdict: " << to_string(r.verdict) << "\n";
    os << "divisor:";
    for (const auto& w : d.weights()) os << ' ' << w.to_string();
    os << " (" << to_string(r.stability) << ")\n";
    os << "curvature outside cores: min " << r.curvature.min << ", max " << r.curvature.max << ", sup|R - chi/2| "
       << r.curvature.sup_dev_half_chi << ", sup|R - (1 - beta_max)| " << r.curvature.sup_dev_cone << "\n";
    os << "clusters:";
    for (const auto& g : r.clusters.groups) {
        os << " {";
        for (std::size_t i = 0; i < g.size(); ++i) os << (i ? "," : "") << g[i] + 1;
        os << "}";
    }
    os << "\n";
    for (const auto& [k, v] : r.residuals) os << "  " << k << " = " << v << "\n";
    for (const auto& s : r.reasons) os << "reason: " << s << "\n";
    for (const auto& s : r.caveats) os << "caveat: " << s << "\n";
    return os.str();
}

std::string mu_table_to_json(const MuTable& t, const Divisor& d) {
    nlohmann::json j;
    j["weights"] = nlohmann::json::array();
    for (const auto& w : d.weights()) j["weights"].push_back(w.to_string());
    j["stability"] = to_string(classify_stability(d));
    j["rows"] = nlohmann::json::array();
    for (const auto& r : t.rows)
        j["rows"].push_back({{"side_p", indices_1based(r.side_p)},
                             {"side_q", indices_1based(r.side_q)},
                             {"beta_p", r.beta_p},
                             {"beta_q", r.beta_q},
                             {"tau", r.tau},
                             {"c", r.c},
                             {"w", r.w}});
    j["excluded"] = nlohmann::json::array();
    for (const auto& e : t.excluded)
        j["excluded"].push_back({{"side_p", indices_1based(e.side_p)},
                                 {"side_q", indices_1based(e.side_q)},
                                 {"beta_p", e.beta_p},
                                 {"beta_q", e.beta_q}});
    if (t.threshold) j["threshold"] = *t.threshold;
    else j["threshold"] = nullptr;
    j["top_is_heaviest_alone"] = t.top_is_heaviest_alone;
    j["warnings"] = t.warnings;
    return j.dump(2) + "\n";
}

std::string mu_table_to_text(const MuTable& t, const Divisor& d) {
    std::ostringstream os;
    os << "weights:";
    for (const auto& w : d.weights()) os << ' ' << w.to_string();
    os << "  (" << to_string(classify_stability(d)) << ")\n";
    os << std::left << std::setw(14) << "I" << std::setw(14) << "I^c" << std::setw(12) << "beta_p" << std::setw(12)
       << "beta_q" << std::setw(14) << "tau" << std::setw(14) << "c" << "W\n";
    auto set_str = [](const std::vector<std::size_t>& v) {
        std::string s = "{";
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + 1);
        return s + "}";
    };
    os << std::setprecision(10);
    for (const auto& r : t.rows)
        os << std::setw(14) << set_str(r.side_p) << std::setw(14) << set_str(r.side_q) << std::setw(12) << r.beta_p
           << std::setw(12) << r.beta_q << std::setw(14) << r.tau << std::setw(14) << r.c << r.w << "\n";
    for (const auto& e : t.excluded)
        os << "excluded: " << set_str(e.side_p) << " has total weight " << e.beta_p << " >= 1\n";
    if (t.threshold) os << "threshold: " << *t.threshold << "\n";
    else os << "threshold undefined\n";
    for (const auto& w : t.warnings) os << "warning: " << w << "\n";
    return os.str();
}

std::string profile_to_csv(const RadialProfile& p) {
    std::ostringstream os;
    os << "x,phi,R,theta,area_from_plus_end\n";
    for (std::size_t i = 0; i < p.x.size(); ++i)
        os << num(p.x[i]) << ',' << num(p.phi[i]) << ',' << num(p.R[i]) << ',' << num(p.theta[i]) << ','
           << num(RadialProfile::area_from_plus_end(p.x[i])) << '\n';
    return os.str();
}

std::string manifest_to_json(const Manifest& m, const FlowConfig& cfg) {
    const auto& uc = unit_constants();
    nlohmann::json j;
    j["config_hash"] = m.config_hash;
    j["version"] = m.version;
    j["units"] = {{"total_area", uc.total_area},
                  {"round_radius", uc.round_radius},
                  {"curvature_scale", uc.curvature_scale},
                  {"laplacian_scale", uc.laplacian_scale},
                  {"gradient_scale", uc.gradient_scale},
                  {"round_curvature_error", uc.round_curvature_error},
                  {"ibp_residual", uc.ibp_residual},
                  {"conformal_identity_error", uc.conformal_identity_error}};
    j["grid"] = {{"n_lat", cfg.n_lat}, {"n_lon", cfg.n_lon}, {"axisymmetric", cfg.axisymmetric}};
    j["epsilon"] = cfg.epsilon;
    j["wall_seconds"] = m.wall_seconds;
    j["complete"] = m.complete;
    if (!m.failure.empty()) j["failure"] = m.failure;
    j["steps"] = m.steps;
    j["initial_mu_estimate"] = json_number(m.initial_mu);
    j["final_mu_estimate"] = json_number(m.final_mu);
    j["mu_tag"] = "upper-bound estimate";
    j["files"] = m.files;
    j["config"] = m.config_text;
    return j.dump(2) + "\n";
}

}  // namespace conicflow
