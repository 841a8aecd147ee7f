#include "conicflow/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace conicflow {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Raw {
    std::vector<std::pair<std::string, std::string>> entries;
};

Raw read_lines(const std::string& text) {
    Raw r;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::map<std::string, int> seen;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        auto key = trim(line.substr(0, eq));
        auto val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (seen.count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' repeated (first on line " +
                              std::to_string(seen[key]) + ")");
        seen[key] = lineno;
        r.entries.emplace_back(key, val);
    }
    return r;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return p;
    return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

std::vector<Vec3> parse_positions(const std::string& v) {
    std::vector<Vec3> out;
    std::string chunk;
    std::istringstream is(v);
    while (std::getline(is, chunk, ';')) {
        auto t = split_ws(chunk);
        if (t.empty()) continue;
        if (t.size() != 3) throw ConfigError("key 'positions': each point needs three coordinates");
        out.push_back({to_double("positions", t[0]), to_double("positions", t[1]), to_double("positions", t[2])});
    }
    return out;
}

FlowConfig build(const Raw& raw, const std::string& base_dir, std::map<std::string, std::string>* sweep_keys) {
    FlowConfig c;
    std::vector<Weight> weights;
    std::vector<Vec3> positions;
    bool have_positions = false;
    std::string divisor_file;

    using Setter = std::function<void(const std::string&)>;
    std::map<std::string, Setter> set{
        {"weights",
         [&](const std::string& v) {
             for (const auto& t : split_ws(v)) {
                 try {
                     weights.push_back(Weight::parse(t));
                 } catch (const std::exception& e) {
                     throw ConfigError(std::string("key 'weights': ") + e.what());
                 }
             }
         }},
        {"positions",
         [&](const std::string& v) {
             positions = parse_positions(v);
             have_positions = true;
         }},
        {"divisor_file", [&](const std::string& v) { divisor_file = resolve(base_dir, v); }},
        {"resolution",
         [&](const std::string& v) {
             auto r = parse_resolution(v);
             c.n_lat = r.first;
             c.n_lon = r.second;
         }},
        {"n_lat", [&](const std::string& v) { c.n_lat = static_cast<int>(to_long("n_lat", v)); }},
        {"n_lon", [&](const std::string& v) { c.n_lon = static_cast<int>(to_long("n_lon", v)); }},
        {"axisymmetric", [&](const std::string& v) { c.axisymmetric = to_bool("axisymmetric", v); }},
        {"epsilon", [&](const std::string& v) { c.epsilon = to_double("epsilon", v); }},
        {"dt", [&](const std::string& v) { c.dt = to_double("dt", v); }},
        {"t_max", [&](const std::string& v) { c.t_max = to_double("t_max", v); }},
        {"renormalize_every",
         [&](const std::string& v) { c.renormalize_every = static_cast<int>(to_long("renormalize_every", v)); }},
        {"stepper",
         [&](const std::string& v) {
             if (v == "semi_implicit") c.stepper = Stepper::SemiImplicit;
             else if (v == "rk2") c.stepper = Stepper::RK2;
             else throw ConfigError("key 'stepper': expected semi_implicit or rk2");
         }},
        {"rhs_form",
         [&](const std::string& v) {
             if (v == "curvature") c.rhs_form = RhsForm::Curvature;
             else if (v == "expanded") c.rhs_form = RhsForm::Expanded;
             else throw ConfigError("key 'rhs_form': expected curvature or expanded");
         }},
        {"cfl", [&](const std::string& v) { c.cfl = to_double("cfl", v); }},
        {"reaction_cfl", [&](const std::string& v) { c.reaction_cfl = to_double("reaction_cfl", v); }},
        {"gauge",
         [&](const std::string& v) {
             if (v == "none") c.gauge = Gauge::None;
             else if (v == "center_of_mass") c.gauge = Gauge::CenterOfMass;
             else throw ConfigError("key 'gauge': expected none or center_of_mass");
         }},
        {"gauge_relax_time", [&](const std::string& v) { c.gauge_relax_time = to_double("gauge_relax_time", v); }},
        {"initial",
         [&](const std::string& v) {
             if (v == "zero") c.initial = InitialKind::Zero;
             else if (v == "bump") c.initial = InitialKind::Bump;
             else if (v == "file") c.initial = InitialKind::File;
             else throw ConfigError("key 'initial': expected zero, bump or file");
         }},
        {"bump_amplitude", [&](const std::string& v) { c.bump_amplitude = to_double("bump_amplitude", v); }},
        {"bump_width", [&](const std::string& v) { c.bump_width = to_double("bump_width", v); }},
        {"initial_file", [&](const std::string& v) { c.initial_file = resolve(base_dir, v); }},
        {"seed", [&](const std::string& v) { c.seed = static_cast<std::uint64_t>(to_long("seed", v)); }},
        {"sample_every", [&](const std::string& v) { c.sample_every = to_double("sample_every", v); }},
        {"snapshot_every", [&](const std::string& v) { c.snapshot_every = to_double("snapshot_every", v); }},
        {"eps_f", [&](const std::string& v) { c.eps_f = to_double("eps_f", v); }},
        {"chow_margin", [&](const std::string& v) { c.chow_margin = to_double("chow_margin", v); }},
        {"ratio_radius", [&](const std::string& v) { c.ratio_radius = to_double("ratio_radius", v); }},
        {"mu_budget", [&](const std::string& v) { c.mu_budget = static_cast<int>(to_long("mu_budget", v)); }},
        {"auto_stop", [&](const std::string& v) { c.auto_stop = to_bool("auto_stop", v); }},
        {"auto_stop_tol", [&](const std::string& v) { c.auto_stop_tol = to_double("auto_stop_tol", v); }},
        {"exclusion", [&](const std::string& v) { c.exclusion = to_double("exclusion", v); }},
        {"curvature_tol", [&](const std::string& v) { c.curvature_tol = to_double("curvature_tol", v); }},
        {"cluster_fraction", [&](const std::string& v) { c.cluster_fraction = to_double("cluster_fraction", v); }},
        {"residual_floor_factor",
         [&](const std::string& v) { c.residual_floor_factor = to_double("residual_floor_factor", v); }},
        {"w_tol", [&](const std::string& v) { c.w_tol = to_double("w_tol", v); }},
        {"profile_tol", [&](const std::string& v) { c.profile_tol = to_double("profile_tol", v); }},
    };

    for (const auto& [key, val] : raw.entries) {
        if (key.rfind("sweep.", 0) == 0) {
            if (!sweep_keys) throw ConfigError("key '" + key + "' is only valid in a sweep file");
            (*sweep_keys)[key] = val;
            continue;
        }
        auto it = set.find(key);
        if (it == set.end()) throw ConfigError("unknown key '" + key + "'");
        if (val.empty()) throw ConfigError("key '" + key + "' has no value");
        it->second(val);
    }

    if (!divisor_file.empty()) {
        if (!weights.empty() || have_positions)
            throw ConfigError("give either divisor_file or weights/positions, not both");
        c.divisor = Divisor::from_file(divisor_file);
    } else if (!weights.empty()) {
        if (!have_positions) {
            if (!c.axisymmetric || weights.size() > 2)
                throw ConfigError("key 'positions' is required unless axisymmetric with at most two points");
            positions = {{0, 0, 1}, {0, 0, -1}};
            positions.resize(weights.size());
        }
        try {
            c.divisor = Divisor(weights, positions);
        } catch (const DivisorError& e) {
            throw ConfigError(std::string("divisor: ") + e.what());
        }
    }
    if (c.axisymmetric) c.n_lon = 1;

    if (c.n_lat < 16) throw ConfigError("n_lat must be at least 16");
    if (!c.axisymmetric && c.n_lon < 32) throw ConfigError("n_lon must be at least 32");
    if (!(c.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(c.dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(c.t_max >= 0.0)) throw ConfigError("t_max must be non-negative");
    if (!(c.sample_every > 0.0)) throw ConfigError("sample_every must be positive");
    if (!(c.gauge_relax_time > 0.0)) throw ConfigError("gauge_relax_time must be positive");
    if (c.initial == InitialKind::File && c.initial_file.empty())
        throw ConfigError("initial = file needs initial_file");
    return c;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dir_of(const std::string& path) {
    auto p = std::filesystem::path(path).parent_path();
    return p.empty() ? "." : p.string();
}

}  // namespace

std::pair<int, int> parse_resolution(const std::string& text) {
    auto x = text.find('x');
    if (x == std::string::npos) throw ConfigError("resolution must look like 64x128, got '" + text + "'");
    return {static_cast<int>(to_long("resolution", text.substr(0, x))),
            static_cast<int>(to_long("resolution", text.substr(x + 1)))};
}

FlowConfig parse_config(const std::string& text, const std::string& base_dir) {
    return build(read_lines(text), base_dir, nullptr);
}

FlowConfig load_config(const std::string& path) { return parse_config(read_file(path), dir_of(path)); }

std::string config_to_text(const FlowConfig& c) {
    std::ostringstream os;
    if (c.divisor.k() > 0) {
        // Original input order so the canonical text round-trips through the parser.
        const auto& src = c.divisor.source_index();
        std::vector<std::size_t> inv(src.size());
        for (std::size_t j = 0; j < src.size(); ++j) inv[src[j]] = j;
        os << "weights =";
        for (auto j : inv) os << ' ' << c.divisor.weights()[j].to_string();
        os << "\npositions =";
        for (std::size_t n = 0; n < inv.size(); ++n) {
            const auto& p = c.divisor.position(inv[n]);
            os << (n ? "; " : " ") << fmt(p[0]) << ' ' << fmt(p[1]) << ' ' << fmt(p[2]);
        }
        os << '\n';
    }
    os << "n_lat = " << c.n_lat << "\nn_lon = " << c.n_lon << "\naxisymmetric = " << (c.axisymmetric ? "true" : "false")
       << "\nepsilon = " << fmt(c.epsilon) << "\ndt = " << fmt(c.dt) << "\nt_max = " << fmt(c.t_max)
       << "\nrenormalize_every = " << c.renormalize_every
       << "\nstepper = " << (c.stepper == Stepper::RK2 ? "rk2" : "semi_implicit")
       << "\nrhs_form = " << (c.rhs_form == RhsForm::Expanded ? "expanded" : "curvature") << "\ncfl = " << fmt(c.cfl)
       << "\nreaction_cfl = " << fmt(c.reaction_cfl)
       << "\ngauge = " << (c.gauge == Gauge::CenterOfMass ? "center_of_mass" : "none")
       << "\ngauge_relax_time = " << fmt(c.gauge_relax_time) << "\ninitial = "
       << (c.initial == InitialKind::Zero ? "zero" : c.initial == InitialKind::Bump ? "bump" : "file")
       << "\nbump_amplitude = " << fmt(c.bump_amplitude) << "\nbump_width = " << fmt(c.bump_width);
    if (!c.initial_file.empty()) os << "\ninitial_file = " << c.initial_file;
    os << "\nseed = " << c.seed << "\nsample_every = " << fmt(c.sample_every)
       << "\nsnapshot_every = " << fmt(c.snapshot_every) << "\neps_f = " << fmt(c.eps_f)
       << "\nchow_margin = " << fmt(c.chow_margin) << "\nratio_radius = " << fmt(c.ratio_radius)
       << "\nmu_budget = " << c.mu_budget << "\nauto_stop = " << (c.auto_stop ? "true" : "false")
       << "\nauto_stop_tol = " << fmt(c.auto_stop_tol) << "\nexclusion = " << fmt(c.exclusion)
       << "\ncurvature_tol = " << fmt(c.curvature_tol) << "\ncluster_fraction = " << fmt(c.cluster_fraction)
       << "\nresidual_floor_factor = " << fmt(c.residual_floor_factor) << "\nw_tol = " << fmt(c.w_tol)
       << "\nprofile_tol = " << fmt(c.profile_tol) << '\n';
    return os.str();
}

SweepSpec parse_sweep(const std::string& text, const std::string& base_dir) {
    std::map<std::string, std::string> keys;
    SweepSpec s;
    s.base = build(read_lines(text), base_dir, &keys);
    for (const auto& [k, v] : keys) {
        auto toks = split_ws(v);
        if (k == "sweep.epsilon")
            for (const auto& t : toks) s.epsilons.push_back(to_double(k, t));
        else if (k == "sweep.resolution")
            for (const auto& t : toks) s.resolutions.push_back(parse_resolution(t));
        else if (k == "sweep.dt")
            for (const auto& t : toks) s.dts.push_back(to_double(k, t));
        else if (k == "sweep.seed")
            for (const auto& t : toks) s.seeds.push_back(static_cast<std::uint64_t>(to_long(k, t)));
        else throw ConfigError("unknown sweep key '" + k + "'");
    }
    return s;
}

SweepSpec load_sweep(const std::string& path) { return parse_sweep(read_file(path), dir_of(path)); }

std::vector<SweepPoint> expand_sweep(const SweepSpec& s) {
    if (s.epsilons.empty() && s.resolutions.empty() && s.dts.empty() && s.seeds.empty())
        throw ConfigError("empty sweep: give at least one of sweep.epsilon, sweep.resolution, sweep.dt, sweep.seed");
    auto eps = s.epsilons.empty() ? std::vector<double>{s.base.epsilon} : s.epsilons;
    auto res = s.resolutions.empty() ? std::vector<std::pair<int, int>>{{s.base.n_lat, s.base.n_lon}} : s.resolutions;
    auto dts = s.dts.empty() ? std::vector<double>{s.base.dt} : s.dts;
    auto seeds = s.seeds.empty() ? std::vector<std::uint64_t>{s.base.seed} : s.seeds;
    std::vector<SweepPoint> out;
    int idx = 0;
    for (auto r : res)
        for (double e : eps)
            for (double d : dts)
                for (auto sd : seeds) {
                    SweepPoint p;
                    p.config = s.base;
                    p.config.n_lat = r.first;
                    p.config.n_lon = s.base.axisymmetric ? 1 : r.second;
                    p.config.epsilon = e;
                    p.config.dt = d;
                    p.config.seed = sd;
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "run_%03d_res%dx%d_eps%g_dt%g_seed%llu", idx++, r.first,
                                  p.config.n_lon, e, d, static_cast<unsigned long long>(sd));
                    p.name = buf;
                    out.push_back(std::move(p));
                }
    return out;
}

}  // namespace conicflow
