#include "conicflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "conicflow/functionals.hpp"
#include "conicflow/geodesic.hpp"

namespace conicflow {

namespace {

constexpr double kPi = std::numbers::pi;

bool near_marked_point(const BackgroundMetric& bg, const Vec3& x, double exclusion) {
    for (const auto& p : bg.divisor.positions())
        if (std::sqrt(std::max(0.0, 0.5 * (1.0 - dot(x, p)))) < exclusion) return true;
    return false;
}

std::vector<std::vector<double>> pair_distances(const MetricState& m) {
    const auto& pts = m.background->divisor.positions();
    const std::size_t k = pts.size();
    std::vector<std::vector<double>> d(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        DistanceField df(m, pts[i]);
        for (std::size_t j = i + 1; j < k; ++j) d[i][j] = d[j][i] = df.to_point(pts[j]);
    }
    return d;
}

template <class Linked>
Clusters single_linkage(std::vector<std::vector<double>> d, Linked linked) {
    const std::size_t k = d.size();
    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (linked(i, j)) parent[find(i)] = find(j);
    Clusters c;
    std::map<std::size_t, std::size_t> slot;
    for (std::size_t i = 0; i < k; ++i) {
        auto r = find(i);
        if (!slot.count(r)) {
            slot[r] = c.groups.size();
            c.groups.emplace_back();
        }
        c.groups[slot[r]].push_back(i);
    }
    const std::size_t g = c.groups.size();
    c.between.assign(g, std::vector<double>(g, 0.0));
    for (std::size_t a = 0; a < g; ++a)
        for (std::size_t b = a + 1; b < g; ++b) {
            double best = std::numeric_limits<double>::infinity();
            for (auto i : c.groups[a])
                for (auto j : c.groups[b]) best = std::min(best, d[i][j]);
            c.between[a][b] = c.between[b][a] = best;
        }
    c.distances = std::move(d);
    return c;
}

std::size_t heaviest_group(const Clusters& c, const Divisor& d) {
    std::size_t best = 0;
    double wbest = -1.0;
    for (std::size_t g = 0; g < c.groups.size(); ++g) {
        double w = 0.0;
        for (auto i : c.groups[g]) w += d.weight(i);
        if (w > wbest) {
            wbest = w;
            best = g;
        }
    }
    return best;
}

}  // namespace

CurvatureStats curvature_stats(const MetricState& m, double exclusion) {
    const auto& bg = *m.background;
    if (bg.divisor.k() > 0 && exclusion < 2.0 * bg.epsilon * (1.0 - 1e-12))
        throw DiagnosticsError("exclusion radius must be at least twice the smoothing length");
    CurvatureStats st;
    st.exclusion = exclusion;
    st.target_half_chi = bg.half_chi();
    st.target_cone = 1.0 - bg.divisor.beta_max();
    auto R = regular_curvature(m);
    auto Rf = scalar_curvature(m);
    const auto& g = m.grid();
    st.min = std::numeric_limits<double>::infinity();
    st.max = -std::numeric_limits<double>::infinity();
    double excluded = 0.0;
    bool any = false;
    for (int a = 0; a < m.size(); ++a) {
        if (near_marked_point(bg, g.xyz(a), exclusion)) {
            excluded += g.weight(a) * m.density(a);
            continue;
        }
        any = true;
        st.min = std::min(st.min, R[a]);
        st.max = std::max(st.max, R[a]);
        st.sup_dev_half_chi = std::max(st.sup_dev_half_chi, std::abs(R[a] - st.target_half_chi));
        st.sup_dev_cone = std::max(st.sup_dev_cone, std::abs(R[a] - st.target_cone));
        st.full_sup_dev_half_chi = std::max(st.full_sup_dev_half_chi, std::abs(Rf[a] - st.target_half_chi));
        st.full_sup_dev_cone = std::max(st.full_sup_dev_cone, std::abs(Rf[a] - st.target_cone));
    }
    if (!any) throw DiagnosticsError("exclusion balls cover the whole sphere");
    st.excluded_area_fraction = excluded / area(m);
    return st;
}

Clusters marked_point_clusters(const MetricState& m, double tol) {
    if (!(tol > 0.0)) throw DiagnosticsError("cluster tolerance must be positive");
    auto d = pair_distances(m);
    return single_linkage(d, [&](std::size_t i, std::size_t j) { return d[i][j] < tol; });
}

Clusters marked_point_clusters_relative(const MetricState& m, const std::vector<double>& initial_pairs,
                                        double fraction) {
    auto d = pair_distances(m);
    const std::size_t k = d.size();
    if (initial_pairs.size() != k * (k - 1) / 2 && k > 0)
        throw DiagnosticsError("initial distance list does not match the number of marked points");
    std::vector<std::vector<double>> d0(k, std::vector<double>(k, 0.0));
    std::size_t idx = 0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) d0[i][j] = d0[j][i] = initial_pairs[idx++];
    return single_linkage(d, [&](std::size_t i, std::size_t j) { return d[i][j] < fraction * d0[i][j]; });
}

double volume_ratio(const MetricState& m, const Vec3& p, double r) {
    if (!(r > 0.0)) throw DiagnosticsError("ball radius must be positive");
    double K = 2.0 * kPi * (1.0 - m.background->divisor.beta_max());
    double model = 2.0 * kPi * (1.0 - std::cos(std::sqrt(K) * r)) / K;
    return ball_volume(m, p, r) / model;
}

double compare_to_profile(const MetricState& m, const RadialProfile& profile, const Clusters& clusters) {
    const auto& bg = *m.background;
    if (bg.divisor.k() == 0 || clusters.groups.empty() || clusters.groups.size() > 2)
        throw DiagnosticsError("marked points do not form one or two clusters; no symmetry axis");
    // Deepest point: heaviest marked point of the heaviest cluster.
    const auto& grp = clusters.groups[heaviest_group(clusters, bg.divisor)];
    std::size_t deep = grp.front();
    for (auto i : grp)
        if (bg.divisor.weight(i) >= bg.divisor.weight(deep)) deep = i;
    DistanceField df(m, bg.divisor.position(deep));
    std::vector<int> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return df.at_node(a) < df.at_node(b); });
    auto R = regular_curvature(m);
    const auto& g = m.grid();
    const double total = area(m);
    double cum = 0.0, err = 0.0;
    for (int a : order) {
        double mass = g.weight(a) * m.density(a);
        double A = 2.0 * (cum + 0.5 * mass) / total;
        double x = std::clamp(1.0 - A, -1.0, 1.0);
        double d = R[a] - profile.curvature(x);
        err += d * d * mass;
        cum += mass;
    }
    return std::sqrt(0.5 * err);
}

double compare_to_profile(const MetricState& m, const RadialProfile& profile) {
    return compare_to_profile(m, profile, marked_point_clusters(m, 0.1 * diameter_estimate(m)));
}

MetricState football_control(const MetricState& like, const Vec3& axis, double beta) {
    const Vec3 p = normalized(axis);
    const Vec3 q{-p[0], -p[1], -p[2]};
    Divisor d({Weight(beta), Weight(beta)}, {p, q});
    auto bg = background_metric(like.background->grid, d, like.background->epsilon);
    ProfileEmbedding emb(football(beta));
    const auto& g = *bg->grid;
    return conical_state(bg, [&](int a) { return std::log(emb.density_at(std::max(angle_between(g.xyz(a), p), 1e-12))); });
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::ConstantCurvature: return "ConstantCurvature";
        case Verdict::Football: return "Football";
        case Verdict::Soliton: return "Soliton";
        default: return "Undecided";
    }
}

ConvergenceReport detect_convergence(const FlowTrace& trace, const MetricState& final_state, const Divisor& divisor,
                                     const FlowConfig& cfg) {
    ConvergenceReport rep;
    const auto& bg = *final_state.background;
    // No marked points: the round sphere, treated as the stable case.
    rep.stability = divisor.empty() ? StabilityClass::Stable : classify_stability(divisor);
    rep.curvature = curvature_stats(final_state, cfg.exclusion);
    rep.thresholds = {{"curvature_tol", cfg.curvature_tol},
                      {"cluster_fraction", cfg.cluster_fraction},
                      {"residual_floor_factor", cfg.residual_floor_factor},
                      {"w_tol", cfg.w_tol},
                      {"profile_tol", cfg.profile_tol},
                      {"exclusion", cfg.exclusion}};
    if (divisor.k() > 0) {
        std::ostringstream os;
        os << "cone cores smoothed at epsilon = " << bg.epsilon << " on a " << final_state.grid().n_lat() << "x"
           << final_state.grid().n_lon()
           << " grid; terminal values carry smoothing and grid bias, compare across an epsilon sweep";
        rep.caveats.push_back(os.str());
        for (const auto& w : theorem_warnings(divisor)) rep.caveats.push_back(w);
    }

    if (trace.records.empty()) {
        rep.reasons.push_back("empty trace");
        return rep;
    }
    rep.clusters = marked_point_clusters_relative(final_state, trace.records.front().distances, cfg.cluster_fraction);
    const auto& groups = rep.clusters.groups;
    rep.residuals["sup_dev_half_chi"] = rep.curvature.sup_dev_half_chi;
    rep.residuals["sup_dev_cone"] = rep.curvature.sup_dev_cone;

    const bool flat = rep.curvature.sup_dev_half_chi < cfg.curvature_tol;
    if (rep.stability == StabilityClass::Stable) {
        if (flat && groups.size() == divisor.k()) {
            rep.verdict = Verdict::ConstantCurvature;
            rep.reasons.push_back("curvature flat at chi/2 and all marked points separate");
        } else {
            if (!flat) rep.reasons.push_back("curvature not flat at chi/2");
            if (groups.size() != divisor.k()) rep.reasons.push_back("marked points merged in a stable run");
        }
        return rep;
    }

    if (rep.stability == StabilityClass::SemiStable) {
        bool bip = groups.size() == 2 && (groups[0].size() == 1 || groups[1].size() == 1);
        bool heavy_alone = false;
        if (bip) {
            const auto& single = groups[0].size() == 1 ? groups[0] : groups[1];
            heavy_alone = single.front() == divisor.k() - 1;
        }
        if (bip && groups.size() == 2 && divisor.k() == 2) heavy_alone = true;
        auto fb = football(divisor.beta_max());
        try {
            rep.residuals["profile"] = compare_to_profile(final_state, fb, rep.clusters);
        } catch (const DiagnosticsError& e) {
            rep.reasons.push_back(e.what());
        }
        if (rep.curvature.sup_dev_cone < cfg.curvature_tol && groups.size() == 2 && heavy_alone) {
            rep.verdict = Verdict::Football;
            rep.reasons.push_back("curvature flat at 1 - beta_max and the heaviest point is alone");
        } else {
            if (rep.curvature.sup_dev_cone >= cfg.curvature_tol) rep.reasons.push_back("curvature not flat at 1 - beta_max");
            if (groups.size() != 2 || !heavy_alone) rep.reasons.push_back("cluster structure is not ({1..k-1},{k})");
        }
        return rep;
    }

    // Unstable: soliton test.
    if (groups.size() != 2) {
        rep.reasons.push_back("marked points do not form two clusters");
        return rep;
    }
    auto sum_w = [&](const std::vector<std::size_t>& g) {
        double s = 0.0;
        for (auto i : g) s += divisor.weight(i);
        return s;
    };
    std::size_t heavy = sum_w(groups[0]) >= sum_w(groups[1]) ? 0 : 1;
    rep.observed_side_p = groups[heavy];
    rep.observed_side_q = groups[1 - heavy];
    double bp = sum_w(rep.observed_side_p), bq = sum_w(rep.observed_side_q);
    rep.observed_beta_p = bp;
    rep.observed_beta_q = bq;
    if (bp >= 1.0) {
        rep.reasons.push_back("observed heavy side has total weight >= 1; no soliton with this partition");
        return rep;
    }

    double resid = soliton_residual(final_state);
    auto control = football_control(final_state, bg.divisor.position(divisor.k() - 1), 0.5 * divisor.weight_sum());
    double floor = soliton_residual(control);
    rep.residuals["soliton_residual"] = resid;
    rep.residuals["soliton_residual_football_control"] = floor;

    double w = normalized_w_at_potential(final_state);
    double w_pred = soliton_w(bp, bq);
    rep.residuals["normalized_w"] = w;
    rep.residuals["mu_table_w"] = w_pred;
    rep.residuals["w_gap"] = std::abs(w - w_pred);

    double best_other = std::numeric_limits<double>::infinity();
    double own = std::numeric_limits<double>::infinity();
    try {
        own = compare_to_profile(final_state, soliton_profile(bp, bq), rep.clusters);
        for (const auto& row : mu_table(divisor).rows) {
            if (std::abs(row.beta_p - bp) < 1e-12 && std::abs(row.beta_q - bq) < 1e-12) continue;
            best_other = std::min(best_other, compare_to_profile(final_state, soliton_profile(row.beta_p, row.beta_q),
                                                                 rep.clusters));
        }
    } catch (const std::exception& e) {
        rep.reasons.push_back(e.what());
    }
    rep.residuals["profile"] = own;
    if (std::isfinite(best_other)) rep.residuals["profile_best_other"] = best_other;

    bool ok = true;
    if (!(resid < cfg.residual_floor_factor * floor)) {
        ok = false;
        rep.reasons.push_back("soliton residual above the football-control floor factor");
    }
    if (!(rep.residuals["w_gap"] < cfg.w_tol)) {
        ok = false;
        rep.reasons.push_back("normalized W does not match the mu-table value of the observed partition");
    }
    if (!(own < cfg.profile_tol)) {
        ok = false;
        rep.reasons.push_back("curvature-area profile does not match the predicted soliton");
    }
    if (std::isfinite(best_other) && !(own < best_other)) {
        ok = false;
        rep.reasons.push_back("another partition's profile matches better");
    }
    if (ok) {
        rep.verdict = Verdict::Soliton;
        rep.reasons.push_back("soliton residual at floor, W and profile match the observed partition");
    }
    return rep;
}

}  // namespace conicflow
