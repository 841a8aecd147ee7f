#include "conicflow_cli/commands.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "conicflow/config.hpp"
#include "conicflow/diagnostics.hpp"
#include "conicflow/functionals.hpp"
#include "conicflow/io.hpp"
#include "conicflow/soliton.hpp"

namespace conicflow::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    std::string t = buf;
    if (t.find_first_of(".en") == std::string::npos) t += ".0";
    return t;
}

std::string full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Divisor load_divisor(const std::string& path) {
    if (fs::path(path).extension() == ".json") return Divisor::from_file(path);
    return load_config(path).divisor;
}

void apply(const Overrides& ov, FlowConfig& cfg) {
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.resolution) {
        auto [nl, nn] = parse_resolution(*ov.resolution);
        cfg.n_lat = nl;
        cfg.n_lon = nn;
    }
    if (ov.epsilon) cfg.epsilon = *ov.epsilon;
    if (ov.t_max) cfg.t_max = *ov.t_max;
    if (ov.dt) cfg.dt = *ov.dt;
}

struct RunOutcome {
    bool complete = false;
    std::string failure;
    FlowResult result;
    ConvergenceReport report;
    bool have_report = false;
    double wall = 0.0;
};

/// Full run into `dir`; throws only for configuration problems.
RunOutcome execute_run(const FlowConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    const std::string cfg_text = config_to_text(cfg);
    Manifest man;
    man.config_text = cfg_text;
    man.config_hash = hex64(fnv1a64(cfg_text));
    man.version = version_string();
    man.complete = false;
    man.failure = "run in progress";
    write_text((dir / "manifest.json").string(), manifest_to_json(man, cfg));
    write_text((dir / "config.conf").string(), cfg_text);

    std::vector<std::string> files{"manifest.json", "config.conf"};
    int snap_index = 0;
    RunHooks hooks;
    hooks.snapshot = [&](const MetricState& s) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "snapshot_%04d", ++snap_index);
        write_snapshot((dir / stem).string(), s, cfg);
        files.push_back(std::string(stem) + ".csv");
        files.push_back(std::string(stem) + ".json");
    };

    RunOutcome o;
    auto t0 = std::chrono::steady_clock::now();
    o.result = run(cfg, hooks);
    o.complete = o.result.complete;
    o.failure = o.result.failure;

    write_text((dir / "trace.csv").string(), trace_to_csv(o.result.trace));
    files.push_back("trace.csv");
    write_snapshot((dir / "final").string(), o.result.final_state, cfg);
    files.push_back("final.csv");
    files.push_back("final.json");
    try {
        o.report = detect_convergence(o.result.trace, o.result.final_state, cfg.divisor, cfg);
        o.have_report = true;
        write_text((dir / "report.json").string(), report_to_json(o.report, cfg.divisor));
        write_text((dir / "report.txt").string(), report_summary(o.report, cfg.divisor));
        files.push_back("report.json");
        files.push_back("report.txt");
    } catch (const std::exception& e) {
        if (o.failure.empty()) o.failure = std::string("report: ") + e.what();
        o.complete = false;
    }
    o.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    man.complete = o.complete;
    man.failure = o.failure;
    man.wall_seconds = o.wall;
    man.steps = o.result.steps;
    man.initial_mu = o.result.initial_mu;
    man.final_mu = o.result.final_mu;
    man.files = files;
    write_text((dir / "manifest.json").string(), manifest_to_json(man, cfg));
    return o;
}

int exit_code(const RunOutcome& o) {
    if (!o.complete) return NumericalFailure;
    if (!o.have_report || o.report.verdict == Verdict::Undecided) return Undecided;
    return Ok;
}

}  // namespace

int cmd_classify(const std::string& path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    try {
        Divisor d = load_divisor(path);
        auto cls = classify_stability(d);
        const double chi = euler_characteristic(d);
        nlohmann::json j;
        j["class"] = to_string(cls);
        j["chi"] = chi;
        j["weights"] = nlohmann::json::array();
        for (const auto& w : d.weights()) j["weights"].push_back(w.to_string());
        std::ostringstream line;
        line << to_string(cls) << ", χ=" << fmt(chi);
        if (cls == StabilityClass::Stable) {
            double a = alpha_invariant(d);
            j["alpha"] = a;
            line << ", α=" << fmt(a);
        } else {
            auto ld = predict_limit_divisor(d);
            j["predicted_limit"] = {{"beta_p", ld.beta_p}, {"beta_q", ld.beta_q}, {"valid", ld.valid}};
            line << ", predicted β_∞=(" << fmt(ld.beta_p) << "," << fmt(ld.beta_q) << ")";
            for (const auto& w : ld.warnings) line << "\nwarning: " << w;
        }
        for (const auto& w : theorem_warnings(d)) line << "\nwarning: " << w;
        out << line.str() << "\n";
        if (!out_dir.empty()) {
            write_text((fs::path(out_dir) / "classify.json").string(), j.dump(2) + "\n");
        }
        return Ok;
    } catch (const std::exception& e) {
        err << "classify: " << e.what() << "\n";
        return Usage;
    }
}

int cmd_soliton_table(const std::string& path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    try {
        Divisor d = load_divisor(path);
        MuTable t = mu_table(d);
        out << mu_table_to_text(t, d);
        if (!out_dir.empty()) write_text((fs::path(out_dir) / "soliton_table.json").string(), mu_table_to_json(t, d));
        return Ok;
    } catch (const std::exception& e) {
        err << "soliton-table: " << e.what() << "\n";
        return Usage;
    }
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const Overrides& ov, std::ostream& out,
            std::ostream& err) {
    FlowConfig cfg;
    try {
        cfg = load_config(config_path);
        apply(ov, cfg);
        make_grid(cfg);
    } catch (const std::exception& e) {
        err << "run: " << e.what() << "\n";
        return Usage;
    }
    try {
        auto o = execute_run(cfg, out_dir.empty() ? fs::path("run") : fs::path(out_dir));
        if (o.have_report) out << report_summary(o.report, cfg.divisor);
        if (!o.complete) err << "run: numerical failure: " << o.failure << "\n";
        return exit_code(o);
    } catch (const MetricError& e) {
        err << "run: " << e.what() << "\n";
        return Usage;
    } catch (const std::exception& e) {
        err << "run: " << e.what() << "\n";
        return NumericalFailure;
    }
}

int cmd_sweep(const std::string& sweep_path, const std::string& out_dir, int workers, const Overrides& ov,
              std::ostream& out, std::ostream& err) {
    std::vector<SweepPoint> points;
    try {
        SweepSpec spec = load_sweep(sweep_path);
        apply(ov, spec.base);
        points = expand_sweep(spec);
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << "\n";
        return Usage;
    }
    if (workers < 1) workers = 1;
    const fs::path root = out_dir.empty() ? fs::path("sweep") : fs::path(out_dir);
    fs::create_directories(root);

    struct Row {
        bool complete = false;
        std::string failure;
        std::string verdict = "Undecided";
        FlowResult result;
        ConvergenceReport report;
        bool have_report = false;
    };
    std::vector<Row> rows(points.size());
    auto residual = [](const Row& r, const std::string& key) {
        if (!r.have_report) return std::numeric_limits<double>::quiet_NaN();
        auto it = r.report.residuals.find(key);
        return it == r.report.residuals.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    };
    std::atomic<std::size_t> next{0};
    std::mutex log_mu;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            Row& r = rows[i];
            try {
                auto o = execute_run(points[i].config, root / points[i].name);
                r.complete = o.complete;
                r.failure = o.failure;
                r.result = std::move(o.result);
                r.report = o.report;
                r.have_report = o.have_report;
                if (o.have_report) r.verdict = to_string(o.report.verdict);
            } catch (const std::exception& e) {
                r.failure = e.what();
            }
            std::lock_guard<std::mutex> lock(log_mu);
            out << points[i].name << ": " << (r.complete ? r.verdict : "failed (" + r.failure + ")") << "\n";
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(workers, static_cast<int>(points.size()));
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::ostringstream csv;
    csv << "run,epsilon,n_lat,n_lon,dt,seed,complete,verdict,steps,t_final,max_area_error,max_f_violation,"
           "max_n_violation,int_R_error,sup_dev_half_chi,sup_dev_cone,full_sup_dev_half_chi,full_sup_dev_cone,"
           "normalized_w,soliton_residual,f_beta,min_distance_ratio,profile_residual,w_gap,failure\n";
    bool all_ok = true;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& c = points[i].config;
        const auto& r = rows[i];
        all_ok = all_ok && r.complete;
        csv << points[i].name << ',' << full(c.epsilon) << ',' << c.n_lat << ',' << c.n_lon << ',' << full(c.dt) << ','
            << c.seed << ',' << (r.complete ? 1 : 0) << ',' << r.verdict << ',' << r.result.steps << ',';
        const auto& recs = r.result.trace.records;
        if (recs.empty()) {
            csv << "nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,";
        } else {
            const auto& last = recs.back();
            double ratio = std::numeric_limits<double>::quiet_NaN();
            if (!recs.front().distances.empty()) {
                ratio = std::numeric_limits<double>::infinity();
                for (std::size_t p = 0; p < last.distances.size(); ++p)
                    ratio = std::min(ratio, last.distances[p] / recs.front().distances[p]);
            }
            double sdh = r.have_report ? r.report.curvature.sup_dev_half_chi : last.sup_dev;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            double sdc = r.have_report ? r.report.curvature.sup_dev_cone : nan;
            double fdh = r.have_report ? r.report.curvature.full_sup_dev_half_chi : nan;
            double fdc = r.have_report ? r.report.curvature.full_sup_dev_cone : nan;
            csv << full(last.t) << ',' << full(r.result.max_area_error) << ',' << full(r.result.max_f_violation) << ','
                << full(r.result.max_n_violation) << ',' << full(std::abs(last.int_R - 2.0)) << ',' << full(sdh) << ','
                << full(sdc) << ',' << full(fdh) << ',' << full(fdc) << ',' << full(last.normalized_w) << ','
                << full(last.soliton_residual) << ',' << full(last.f_beta) << ',' << full(ratio) << ',' << full(residual(r, "profile")) << ',' << full(residual(r, "w_gap")) << ',';
        }
        std::string f = r.failure;
        for (auto& ch : f)
            if (ch == ',' || ch == '\n') ch = ';';
        csv << f << '\n';
    }
    write_text((root / "aggregate.csv").string(), csv.str());
    out << "aggregate: " << (root / "aggregate.csv").string() << "\n";
    return all_ok ? Ok : NumericalFailure;
}

int cmd_report(const std::string& run_dir, std::ostream& out, std::ostream& err) {
    try {
        const fs::path dir(run_dir);
        FlowTrace trace = trace_from_csv(read_text((dir / "trace.csv").string()));
        FlowConfig cfg;
        MetricState fin = load_snapshot((dir / "final.json").string(), &cfg);
        auto rep = detect_convergence(trace, fin, cfg.divisor, cfg);
        write_text((dir / "report.json").string(), report_to_json(rep, cfg.divisor));
        write_text((dir / "report.txt").string(), report_summary(rep, cfg.divisor));
        out << report_summary(rep, cfg.divisor);
        return rep.verdict == Verdict::Undecided ? Undecided : Ok;
    } catch (const std::exception& e) {
        err << "report: " << e.what() << "\n";
        return Usage;
    }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Normalized conical Ricci flow on the marked sphere"};
    app.require_subcommand(1);
    std::string input, out_dir;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    Overrides ov;
    std::uint64_t seed = 0;
    std::string resolution;
    double epsilon = 0.0, t_max = 0.0, dt = 0.0;

    auto add_input = [&](CLI::App* sub, const std::string& what) {
        auto* grp = sub->add_option_group("input");
        grp->add_option("--config", input, what)->check(CLI::ExistingFile);
        grp->add_option("input", input, what)->check(CLI::ExistingPath);
        grp->require_option(1);
    };
    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "initial-data seed");
        sub->add_option("--resolution", resolution, "grid as NLATxNLON");
        sub->add_option("--epsilon", epsilon, "cone smoothing length");
        sub->add_option("--tmax", t_max, "final time");
        sub->add_option("--dt", dt, "largest time step");
    };

    auto* classify = app.add_subcommand("classify", "stability class of a divisor");
    add_input(classify, "divisor JSON or run configuration");
    classify->add_option("--out", out_dir, "directory for classify.json");

    auto* table = app.add_subcommand("soliton-table", "mu-table of the two-point soliton limits");
    add_input(table, "divisor JSON or run configuration");
    table->add_option("--out", out_dir, "directory for soliton_table.json");

    auto* runc = app.add_subcommand("run", "run the flow and classify the terminal state");
    add_input(runc, "run configuration");
    runc->add_option("--out", out_dir, "output directory")->default_str("run");
    add_overrides(runc);

    auto* sweep = app.add_subcommand("sweep", "cartesian parameter sweep");
    add_input(sweep, "sweep specification");
    sweep->add_option("--out", out_dir, "output directory")->default_str("sweep");
    sweep->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);
    add_overrides(sweep);

    auto* report = app.add_subcommand("report", "rebuild the report of a finished run");
    report->add_option("run_dir", input, "run output directory")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? Ok : Usage;
    }
    for (auto* sub : {runc, sweep}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) ov.seed = seed;
        if (sub->count("--resolution")) ov.resolution = resolution;
        if (sub->count("--epsilon")) ov.epsilon = epsilon;
        if (sub->count("--tmax")) ov.t_max = t_max;
        if (sub->count("--dt")) ov.dt = dt;
    }
    if (classify->parsed()) return cmd_classify(input, out_dir, out, err);
    if (table->parsed()) return cmd_soliton_table(input, out_dir, out, err);
    if (runc->parsed()) return cmd_run(input, out_dir, ov, out, err);
    if (sweep->parsed()) return cmd_sweep(input, out_dir, workers, ov, out, err);
    return cmd_report(input, out, err);
}

}  // namespace conicflow::cli
