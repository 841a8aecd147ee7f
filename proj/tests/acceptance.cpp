// Acceptance suite: one PASS/FAIL line per criterion. Flow criteria go through the command
// layer (the same code path as the `conicflow` executable) and read back the written artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conicflow/config.hpp"
#include "conicflow/diagnostics.hpp"
#include "conicflow/divisor.hpp"
#include "conicflow/flow.hpp"
#include "conicflow/functionals.hpp"
#include "conicflow/geodesic.hpp"
#include "conicflow/io.hpp"
#include "conicflow/metric.hpp"
#include "conicflow/soliton.hpp"
#include "conicflow_cli/commands.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace conicflow;
using nlohmann::json;

namespace {

// Pinned tolerances.
constexpr double kTauTol = 1e-10;
constexpr double kRoundTripTol = 1e-12;
constexpr double kStencilTol = 1e-10;
constexpr double kRoundCurvatureTol = 1e-3;
constexpr double kConeMassRelTol = 0.10;
constexpr double kAreaTol = 1e-10;
constexpr double kStepSlack = 1e-6;
constexpr double kCurvatureTol = 5e-2;
constexpr double kSeparatedFraction = 0.5;
constexpr double kMergedFraction = 0.1;
constexpr double kResidualFactor = 3.0;
constexpr double kResidualRelSlack = 1e-3;
constexpr double kWTol = 5e-2;
constexpr double kProfileTol = 1e-2;
constexpr double kDiscrimination = 3.0;
constexpr double kProfileWTol = 1e-8;

const std::string kConfigs = CONICFLOW_CONFIG_DIR;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
    }
};

std::string num(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

struct RunArtifacts {
    int rc = -1;
    fs::path dir;
    FlowTrace trace;
    json report, manifest;
    std::string log;
};

fs::path work_root() {
    static fs::path root = [] {
        auto p = fs::temp_directory_path() / "conicflow_acceptance";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

RunArtifacts run_cli(const std::string& name, const std::string& config_path, const cli::Overrides& ov = {}) {
    RunArtifacts a;
    a.dir = work_root() / name;
    std::ostringstream out, err;
    auto t0 = std::chrono::steady_clock::now();
    a.rc = cli::cmd_run(config_path, a.dir.string(), ov, out, err);
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  run " << name << ": exit " << a.rc << ", " << num(wall, 3) << " s\n";
    a.log = err.str();
    if (fs::exists(a.dir / "trace.csv")) a.trace = trace_from_csv(read_text((a.dir / "trace.csv").string()));
    if (fs::exists(a.dir / "report.json")) a.report = json::parse(read_text((a.dir / "report.json").string()));
    if (fs::exists(a.dir / "manifest.json")) a.manifest = json::parse(read_text((a.dir / "manifest.json").string()));
    return a;
}

RunArtifacts run_text(const std::string& name, const std::string& config_text, const cli::Overrides& ov = {}) {
    auto path = work_root() / (name + ".conf");
    write_text(path.string(), config_text);
    return run_cli(name, path.string(), ov);
}

double column_max(const FlowTrace& t, const std::string& c) {
    double m = -INFINITY;
    for (double v : t.column(c)) m = std::isnan(v) ? INFINITY : std::max(m, v);
    return m;
}

// ---------------------------------------------------------------------------------------------

Outcome closed_form_calculus() {
    Outcome o;
    double quad = oracle::tau(1.0, 1000000);
    double closed = 1.0 / std::tanh(1.0) - 1.0;
    o.require(std::abs(tau_of_c(1.0) - quad) < kTauTol && std::abs(closed - quad) < kTauTol,
              "tau_of_c(1) vs quadrature " + num(std::abs(tau_of_c(1.0) - quad), 2));
    std::mt19937_64 rng(20260101);
    std::uniform_real_distribution<double> ut(-0.99, 0.99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double t = ut(rng);
        worst = std::max(worst, std::abs(tau_of_c(solve_c(t)) - t));
    }
    o.require(worst < kRoundTripTol, "solve_c round trip max " + num(worst, 2));
    bool diag = true;
    for (double b : {0.05, 0.3, 0.5, 0.77, 0.95}) {
        auto s = make_soliton_spec(b, b);
        diag = diag && s.tau == 0.0 && s.c == 0.0 && soliton_w(b, b) == 1.0;
    }
    o.require(diag, "soliton_w(b,b) == 1 via c = 0");
    return o;
}

Outcome w_monotonicity() {
    Outcome o;
    std::mt19937_64 rng(7202);
    std::uniform_real_distribution<double> us(0.05, 1.95), uu(0.0, 1.0);
    int violations = 0, samples = 0;
    while (samples < 500) {
        double s = us(rng);
        double amax = std::min(s, 2.0 - s);
        double a1 = amax * uu(rng), a2 = amax * uu(rng);
        if (a1 == a2) continue;
        if (a1 > a2) std::swap(a1, a2);
        double w1 = soliton_w(0.5 * (s + a1), 0.5 * (s - a1));
        double w2 = soliton_w(0.5 * (s + a2), 0.5 * (s - a2));
        if (!(w1 > w2)) ++violations;
        ++samples;
    }
    o.require(violations == 0, std::to_string(samples) + " quadruples, " + std::to_string(violations) + " violations");
    return o;
}

Outcome mu_ordering() {
    Outcome o;
    std::mt19937_64 rng(3003);
    std::uniform_real_distribution<double> uw(0.01, 0.99), ux(-1.0, 1.0);
    std::uniform_int_distribution<int> uk(3, 6);
    int samples = 0, wrong_top = 0, ties = 0, multi = 0;
    while (samples < 100) {
        int k = uk(rng);
        std::vector<Weight> w;
        std::vector<Vec3> pos;
        for (int i = 0; i < k; ++i) {
            w.emplace_back(uw(rng));
            pos.push_back({ux(rng), ux(rng), ux(rng)});
        }
        Divisor d(w, pos);
        if (classify_stability(d) != StabilityClass::Unstable) continue;
        ++samples;
        auto t = mu_table(d);
        if (t.rows.empty() || !(t.rows[0].side_p == std::vector<std::size_t>{d.k() - 1})) ++wrong_top;
        if (t.rows.size() >= 2) {
            ++multi;
            if (!(t.rows[0].w > t.rows[1].w)) ++ties;
        }
    }
    o.require(wrong_top == 0, "argmax I = {k} in " + std::to_string(samples - wrong_top) + "/100");
    o.require(ties == 0, "mu1 > mu2 in " + std::to_string(multi - ties) + "/" + std::to_string(multi));
    return o;
}

Outcome geometry_calibration() {
    Outcome o;
    Divisor three({Weight(0.5), Weight(0.5), Weight(0.5)}, {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{-0.5, -0.8, 0.1}});
    auto g = build_grid(64, 128, Divisor());
    std::mt19937_64 rng(44);
    std::normal_distribution<double> nd;
    auto random_field = [&] {
        Field f(g->size());
        for (auto& v : f) v = nd(rng);
        return f;
    };
    double adj = 0.0, kernel = 0.0, ibp = 0.0;
    auto m = initial_state(background_metric(build_grid(64, 128, three), 0.1));
    for (int a = 0; a < m.size(); ++a)
        m.u[a] = 0.4 * std::sin(m.grid().theta_of(a)) * std::cos(m.grid().phi_of(a));
    renormalize(m);
    for (int trial = 0; trial < 20; ++trial) {
        auto f = random_field(), h = random_field();
        auto lf = round_laplacian(*g, f), lh = round_laplacian(*g, h);
        double x = 0.0, y = 0.0;
        for (int a = 0; a < g->size(); ++a) x += lf[a] * h[a] * g->weight(a), y += f[a] * lh[a] * g->weight(a);
        adj = std::max(adj, std::abs(x - y) / (1.0 + std::abs(x)));
        auto lm = laplacian(f, m);
        Field prod(m.size());
        for (int a = 0; a < m.size(); ++a) prod[a] = lm[a] * h[a];
        double lhs = integrate(prod, m), rhs = -dirichlet_pairing(m.grid(), f, h);
        ibp = std::max(ibp, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }
    for (double v : round_laplacian(*g, Field(g->size(), 2.5))) kernel = std::max(kernel, std::abs(v));
    o.require(adj < kStencilTol && kernel < kStencilTol,
              "self-adjoint " + num(adj, 2) + ", kernel " + num(kernel, 2));
    o.require(ibp < kStencilTol, "integration by parts " + num(ibp, 2));
    auto round = initial_state(background_metric(g, 0.1));
    double rdev = 0.0;
    for (double r : scalar_curvature(round)) rdev = std::max(rdev, std::abs(r - 1.0));
    o.require(std::abs(area(round) - 2.0) < kRoundCurvatureTol && rdev < kRoundCurvatureTol,
              "round area " + num(area(round), 12) + ", sup|R-1| " + num(rdev, 2));
    // Curvature mass in the section-norm ball sin(d/2) < 0.1, Richardson-extrapolated in epsilon.
    auto fine_grid = build_grid(128, 256, three);
    auto mass = [&](double eps, const Vec3& p) {
        auto s = initial_state(background_metric(fine_grid, eps));
        auto R = scalar_curvature(s);
        double acc = 0.0;
        for (int a = 0; a < s.size(); ++a)
            if (std::sqrt(std::max(0.0, 0.5 * (1.0 - dot(fine_grid->xyz(a), p)))) < 0.1)
                acc += R[a] * fine_grid->weight(a) * s.density(a);
        return acc;
    };
    double worst = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& p = fine_grid->placed_divisor().position(j);
        double limit = (4.0 * mass(0.025, p) - mass(0.05, p)) / 3.0;
        worst = std::max(worst, std::abs(limit - 0.5) / 0.5);
    }
    o.require(worst < kConeMassRelTol, "cone mass extrapolation rel err " + num(worst, 3));
    return o;
}

struct FlowRuns {
    RunArtifacts stable, semistable, unstable;
};

Outcome conservation(const FlowRuns& runs) {
    Outcome o;
    for (auto* r : {&runs.stable, &runs.semistable, &runs.unstable}) {
        std::string name = r->dir.filename().string();
        if (r->trace.records.empty()) {
            o.require(false, name + " produced no trace (exit " + std::to_string(r->rc) + ")");
            continue;
        }
        double area_err = column_max(r->trace, "max_area_error");
        double fv = column_max(r->trace, "f_violation");
        double nv = column_max(r->trace, "n_violation");
        // Running sup |R| bounded: the second half of the run adds no more than 1%.
        auto sup = r->trace.column("sup_abs_R");
        double mid = sup[sup.size() / 2], last = sup.back();
        bool bounded = std::isfinite(last) && last <= 1.01 * mid;
        o.require(area_err < kAreaTol, name + " area err " + num(area_err, 2));
        o.require(fv <= kStepSlack, name + " F viol " + num(fv, 2));
        o.require(nv <= kStepSlack, name + " N viol " + num(nv, 2));
        o.require(bounded, name + " sup|R| " + num(last, 4));
    }
    return o;
}

Outcome stable_limit(const RunArtifacts& r) {
    Outcome o;
    if (r.report.is_null()) {
        o.require(false, "no report");
        return o;
    }
    double dev = r.report["curvature"]["sup_dev_half_chi"];
    double target = r.report["curvature"]["target_half_chi"];
    o.require(std::abs(target - 0.25) < 1e-12, "target " + num(target));
    o.require(dev < kCurvatureTol, "sup|R-0.25| " + num(dev, 3));
    double worst = INFINITY;
    for (const auto& c : {"d_1_2", "d_1_3", "d_2_3"}) {
        auto d = r.trace.column(c);
        worst = std::min(worst, *std::min_element(d.begin(), d.end()) / d.front());
    }
    o.require(worst > kSeparatedFraction, "min distance ratio " + num(worst, 3));
    o.require(r.report["verdict"] == "ConstantCurvature", "verdict " + r.report["verdict"].get<std::string>());
    return o;
}

Outcome semistable_limit(const RunArtifacts& r) {
    Outcome o;
    if (r.report.is_null()) {
        o.require(false, "no report");
        return o;
    }
    double dev = r.report["curvature"]["sup_dev_half_chi"];
    o.require(dev < kCurvatureTol, "t=" + num(r.trace.records.back().t) + " sup|R-0.4| " + num(dev, 3));
    auto ratio = [&](const char* c) {
        auto d = r.trace.column(c);
        return d.back() / d.front();
    };
    double r12 = ratio("d_1_2"), r13 = ratio("d_1_3"), r23 = ratio("d_2_3");
    o.require(r12 < kMergedFraction, "d12 ratio " + num(r12, 3));
    o.require(std::min(r13, r23) > kSeparatedFraction, "d(p3,cluster) ratio " + num(std::min(r13, r23), 3));
    std::string verdict = r.report["verdict"];
    o.require(verdict == "Football", "verdict " + verdict);
    bool split = r.report["clusters"] == json::parse("[[1,2],[3]]");
    o.require(split, "clusters " + r.report["clusters"].dump());
    return o;
}

double axisymmetric_w_gap(double eps) {
    int n = 1024;
    std::string text = "weights = 3/10 4/5\npositions = 0 0 -1; 0 0 1\naxisymmetric = true\nresolution = " +
                       std::to_string(n) + "x1\nepsilon = " + num(eps, 6) +
                       "\ndt = 0.02\nt_max = 12\ngauge = center_of_mass\nmu_budget = 0\nsample_every = 6\n";
    auto r = run_text("eps_sweep_" + num(eps, 6), text);
    if (r.trace.records.empty()) return NAN;
    return std::abs(r.trace.records.back().normalized_w - soliton_w(0.8, 0.3));
}

Outcome unstable_limit(const RunArtifacts& r) {
    Outcome o;
    if (r.report.is_null() || r.trace.records.empty()) {
        o.require(false, "no report");
        return o;
    }
    // Residual: non-increasing after the first quarter, ending below 3x the exact football control.
    auto res = r.trace.column("soliton_residual");
    auto t = r.trace.column("t");
    double burn = 0.25 * t.back();
    int rises = 0;
    for (std::size_t i = 1; i < res.size(); ++i)
        if (t[i - 1] >= burn && res[i] > res[i - 1] * (1.0 + kResidualRelSlack)) ++rises;
    double control = r.report["residuals"]["soliton_residual_football_control"];
    o.require(rises == 0, "residual rises after burn-in " + std::to_string(rises));
    o.require(res.back() < kResidualFactor * control,
              "residual " + num(res.back(), 3) + " vs control " + num(control, 3));
    // Partition and W.
    // Weights come from the run's config; the final positions may coincide after merging.
    Divisor d = load_config((r.dir / "config.conf").string()).divisor;
    auto table = mu_table(d);
    double mu0 = r.manifest["initial_mu_estimate"];
    bool above = table.threshold && mu0 > *table.threshold;
    json part = r.report.contains("observed_partition") ? r.report["observed_partition"]["side_p"] : json();
    if (above) o.require(part == json::parse("[3]"), "mu0 " + num(mu0, 4) + " > mu2, partition " + part.dump());
    else o.require(!part.is_null(), "partition " + part.dump());
    double w = r.report["residuals"]["normalized_w"], wp = r.report["residuals"]["mu_table_w"];
    o.require(std::abs(w - wp) < kWTol, "W " + num(w, 4) + " vs " + num(wp, 4) + " gap " + num(std::abs(w - wp), 3));
    // Epsilon-halving sweep on the rotationally symmetric reduction of the observed limit pair.
    std::vector<double> gaps;
    for (double eps : {0.05, 0.025, 0.0125, 0.00625}) gaps.push_back(axisymmetric_w_gap(eps));
    bool shrinking = true;
    std::string seq;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        seq += (i ? ">" : "") + num(gaps[i], 3);
        if (i && !(gaps[i] < gaps[i - 1])) shrinking = false;
    }
    o.require(shrinking, "eps-halving gaps " + seq);
    return o;
}

Outcome axisymmetric_profile() {
    Outcome o;
    std::string text =
        "weights = 3/10 4/5\npositions = 0 0 -1; 0 0 1\naxisymmetric = true\nresolution = 65536x1\n"
        "epsilon = 5e-5\ndt = 0.02\nt_max = 12\ngauge = center_of_mass\nmu_budget = 0\nsample_every = 3\n";
    auto r = run_text("axisymmetric", text);
    if (!fs::exists(r.dir / "final.json")) {
        o.require(false, "no final state (exit " + std::to_string(r.rc) + ")");
        return o;
    }
    auto state = load_snapshot((r.dir / "final.json").string());
    double own = compare_to_profile(state, soliton_profile(0.8, 0.3));
    double other = compare_to_profile(state, soliton_profile(0.9, 0.2));
    o.require(own < kProfileTol, "L2 vs (0.8,0.3) " + num(own, 3));
    o.require(other >= kDiscrimination * own, "vs (0.9,0.2) " + num(other, 3) + " ratio " + num(other / own, 3));
    return o;
}

Outcome profile_consistency() {
    Outcome o;
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> ub(0.0, 0.98);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        double a = ub(rng), b = ub(rng);
        auto s = make_soliton_spec(std::max(a, b), std::min(a, b));
        auto p = soliton_profile(s.beta_p, s.beta_q);
        worst = std::max(worst, std::abs(profile_normalized_w(p) - (1.0 - f_of_c(s.c))));
    }
    o.require(worst < kProfileWTol, "20 pairs, max |W_quad - (1 - f(c))| " + num(worst, 2));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
    auto wanted = [&](int c) { return only.empty() || only.count(c); };

    std::map<int, std::pair<std::string, std::function<Outcome()>>> table;
    std::map<std::string, RunArtifacts> cache;
    auto shipped = [&](const std::string& name) -> const RunArtifacts& {
        if (!cache.count(name)) cache[name] = run_cli(name, kConfigs + "/" + name + ".conf");
        return cache[name];
    };
    auto flows = [&] { return FlowRuns{shipped("stable"), shipped("semistable"), shipped("unstable")}; };
    table[1] = {"closed-form soliton calculus", closed_form_calculus};
    table[2] = {"W monotone in asymmetry", w_monotonicity};
    table[3] = {"mu-table ordering", mu_ordering};
    table[4] = {"discrete geometry calibration", geometry_calibration};
    table[5] = {"conservation and monotonicity", [&] { return conservation(flows()); }};
    table[6] = {"stable limit", [&] { return stable_limit(shipped("stable")); }};
    table[7] = {"semi-stable limit", [&] {
                    cli::Overrides ov;
                    ov.t_max = 400.0;
                    ov.dt = 0.25;
                    return semistable_limit(run_cli("semistable_long", kConfigs + "/semistable.conf", ov));
                }};
    table[8] = {"unstable limit", [&] { return unstable_limit(shipped("unstable")); }};
    table[9] = {"axisymmetric cross-validation", axisymmetric_profile};
    table[10] = {"profile and closed-form W", profile_consistency};

    int failures = 0;
    for (auto& [id, entry] : table) {
        if (!wanted(id)) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = entry.second();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << entry.first << ": "
                  << o.detail.str() << " (" << num(wall, 3) << " s)" << std::endl;
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
