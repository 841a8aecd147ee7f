#include <doctest.h>

#include "conicflow/diagnostics.hpp"
#include "conicflow/flow.hpp"
#include "conicflow/functionals.hpp"

using namespace conicflow;

namespace {

Divisor semistable() {
    return Divisor({Weight::parse("3/10"), Weight::parse("3/10"), Weight::parse("3/5")},
                   {Vec3{0.9, 0.1, 0.4}, Vec3{-0.5, 0.8, -0.3}, Vec3{-0.3, -0.8, -0.5}});
}

FlowConfig small(const Divisor& d) {
    FlowConfig c;
    c.divisor = d;
    c.n_lat = 24;
    c.n_lon = 48;
    c.epsilon = 0.15;
    c.dt = 0.01;
    c.t_max = 0.5;
    c.initial = InitialKind::Bump;
    c.sample_every = 0.1;
    c.mu_budget = 0;
    return c;
}

double sup_dev_round(const MetricState& m) {
    double s = 0.0;
    for (double r : scalar_curvature(m)) s = std::max(s, std::abs(r - 1.0));
    return s;
}

}  // namespace

TEST_CASE("the two right-hand side forms agree") {
    auto cfg = small(semistable());
    auto m = make_initial_state(cfg);
    auto a = flow_rhs(m, RhsForm::Curvature), b = flow_rhs(m, RhsForm::Expanded);
    for (int i = 0; i < m.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
}

TEST_CASE("explicit and semi-implicit steps agree for small dt") {
    auto m = make_initial_state(small(semistable()));
    double dt = 0.2 * explicit_dt_bound(m);
    auto a = step(m, dt, Stepper::RK2), b = step(m, dt, Stepper::SemiImplicit);
    double diff = 0.0, change = 0.0;
    for (int i = 0; i < m.size(); ++i) {
        diff = std::max(diff, std::abs(a.u[i] - b.u[i]));
        change = std::max(change, std::abs(a.u[i] - m.u[i]));
    }
    CHECK(diff < 0.05 * change);
}

TEST_CASE("area stays 2 and F decreases under the stepper") {
    for (auto gauge : {Gauge::None, Gauge::CenterOfMass}) {
        auto cfg = small(semistable());
        cfg.gauge = gauge;
        FlowStepper st(cfg, make_initial_state(cfg));
        double f = st.f_beta_total();
        for (int i = 0; i < 30; ++i) {
            st.advance(cfg.dt);
            CHECK(area(st.state()) == doctest::Approx(2.0).epsilon(1e-12));
            double next = st.f_beta_total();
            CHECK(next <= f + 1e-10);
            f = next;
        }
    }
}

TEST_CASE("round sphere flow smooths a bump") {
    FlowConfig cfg = small(Divisor());
    cfg.t_max = 1.0;
    FlowStepper st(cfg, make_initial_state(cfg));
    double prev = sup_dev_round(st.state());
    for (int i = 0; i < 10; ++i) {
        while (st.state().t < 0.1 * (i + 1) - 1e-12) st.advance(std::min(cfg.dt, 0.1 * (i + 1) - st.state().t));
        double now = sup_dev_round(st.state());
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("runs are deterministic") {
    auto cfg = small(semistable());
    cfg.gauge = Gauge::CenterOfMass;
    auto a = run(cfg), b = run(cfg);
    REQUIRE(a.trace.records.size() == b.trace.records.size());
    for (std::size_t i = 0; i < a.trace.records.size(); ++i)
        CHECK(a.trace.row(a.trace.records[i]) == b.trace.row(b.trace.records[i]));
    CHECK(a.complete);
    CHECK(a.max_f_violation <= 1e-10);
}

TEST_CASE("trace columns line up with rows") {
    auto cfg = small(semistable());
    auto r = run(cfg);
    REQUIRE(!r.trace.records.empty());
    CHECK(r.trace.columns().size() == r.trace.row(r.trace.records.front()).size());
    auto t = r.trace.column("t");
    CHECK(t.front() == 0.0);
    CHECK(t.back() == doctest::Approx(cfg.t_max));
}

TEST_CASE("axisymmetric football converges to constant curvature") {
    FlowConfig cfg;
    cfg.divisor = Divisor({Weight(0.3), Weight(0.3)}, {Vec3{0, 0, 1}, Vec3{0, 0, -1}});
    cfg.axisymmetric = true;
    cfg.n_lat = 256;
    cfg.epsilon = 0.02;
    cfg.dt = 0.05;
    cfg.t_max = 20.0;
    cfg.initial = InitialKind::Bump;
    cfg.mu_budget = 0;
    cfg.sample_every = 5.0;
    auto res = run_axisymmetric(cfg);
    REQUIRE(res.complete);
    auto cs = curvature_stats(res.final_state, 0.2);
    CHECK(cs.target_half_chi == doctest::Approx(0.7));
    CHECK(cs.sup_dev_half_chi < 1e-3);
}

TEST_CASE("invalid configurations are rejected") {
    auto cfg = small(semistable());
    cfg.axisymmetric = true;
    CHECK_THROWS(run_axisymmetric(cfg));
    auto tight = small(semistable());
    tight.epsilon = 0.01;
    CHECK_THROWS(make_initial_state(tight));
}
