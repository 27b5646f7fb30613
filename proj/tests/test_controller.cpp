#include "knobtune/controller.hpp"
#include "knobtune/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace knobtune;

namespace {

Scenario linear_board(std::vector<int> lengths, double power_cap, std::vector<double> works)
{
    Scenario sc;
    sc.name = "t";
    sc.space = KnobSpace({KnobDimension{"cores", {1, 2, 3, 4, 5, 6}}, KnobDimension{"f", {1, 2, 3, 4}}});
    sc.noise_cv = {0.0};
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        SurfaceSpec o;
        o.family = SurfaceFamily::ParallelScaling;
        o.metric = "tput";
        o.goal = Goal::Maximize;
        o.work = works[i];
        o.parallel_time = 1.0;
        o.cores = {{"cores", "f", 1.0}};
        SurfaceSpec p;
        p.family = SurfaceFamily::PowerModel;
        p.metric = "power";
        p.bound = Bound::Below;
        p.set_point = power_cap;
        p.static_power = 1.0;
        p.cores = {{"cores", "f", 1.0}};
        sc.phases.push_back(PhaseSpec{lengths[i], o, {p}});
    }
    return sc;
}

ControllerConfig config(int n, int m)
{
    ControllerConfig c;
    c.schedule = {n, m, Strategy::Hybrid};
    c.seed = 42;
    return c;
}

std::size_t count(const ControllerLog& log, EventKind k)
{
    return std::count_if(log.events.begin(), log.events.end(), [&](const auto& e) { return e.kind == k; });
}

// Replays scripted interval results, then Ended.
class ScriptedWorkload : public ControlledWorkload {
public:
    explicit ScriptedWorkload(std::vector<IntervalResult> script) : script_(std::move(script)) {}
    void begin_new_phase() override {}
    void apply_sample(const KnobSetting&, int) override {}
    void apply_chosen(const BestChoice&) override {}
    IntervalResult measure() override
    {
        if (next_ >= script_.size()) return {IntervalResult::Status::Ended, {}};
        return script_[next_++];
    }

private:
    std::vector<IntervalResult> script_;
    std::size_t next_ = 0;
};

}  // namespace

TEST_CASE("monitor step")
{
    PhaseDetector d{100.0, {}, 0.10, 2, 0};
    CHECK(monitor_step(d, 105.0, {}) == MonitorVerdict::Stay);
    CHECK(monitor_step(d, 115.0, {}) == MonitorVerdict::Stay);
    CHECK(d.violation_streak == 1);
    CHECK(monitor_step(d, 84.0, {}) == MonitorVerdict::NewPhase);
    CHECK(d.violation_streak == 0);

    SUBCASE("an in-range reading resets the streak")
    {
        CHECK(monitor_step(d, 115.0, {}) == MonitorVerdict::Stay);
        CHECK(monitor_step(d, 100.0, {}) == MonitorVerdict::Stay);
        CHECK(monitor_step(d, 115.0, {}) == MonitorVerdict::Stay);
    }
    SUBCASE("exactly at the threshold is not a deviation")
    {
        PhaseDetector e{100.0, {}, 0.25, 1, 0};
        CHECK(monitor_step(e, 125.0, {}) == MonitorVerdict::Stay);
        CHECK(monitor_step(e, 125.5, {}) == MonitorVerdict::NewPhase);
    }
    SUBCASE("constraint metrics count too")
    {
        PhaseDetector c{100.0, {4.0}, 0.10, 1, 0};
        const double ok[] = {4.2};
        const double off[] = {4.5};
        CHECK(monitor_step(c, 100.0, ok) == MonitorVerdict::Stay);
        CHECK(monitor_step(c, 100.0, off) == MonitorVerdict::NewPhase);
        CHECK_THROWS_AS(monitor_step(c, 100.0, {}), ContractViolation);
    }
    SUBCASE("configuration")
    {
        CHECK_THROWS_AS((PhaseDetector{1.0, {}, 0.0, 2, 0}.validate()), ConfigError);
        CHECK_THROWS_AS((PhaseDetector{1.0, {}, 1.0, 2, 0}.validate()), ConfigError);
        CHECK_THROWS_AS((PhaseDetector{1.0, {}, 0.1, 0, 0}.validate()), ConfigError);
    }
}

TEST_CASE("single phase run")
{
    const auto sc = linear_board({20}, 10.0, {10.0});
    SimulatorBackedWorkload w(sc, 1);
    const auto log = control_loop(w, sc.space, sc.spec(), config(8, 3));

    CHECK_FALSE(log.aborted);
    CHECK(count(log, EventKind::PhaseStarted) == 1);
    CHECK(count(log, EventKind::SampleRequested) == 8);
    CHECK(count(log, EventKind::SampleMeasured) == 8);
    CHECK(count(log, EventKind::KnobChosen) == 1);
    CHECK(count(log, EventKind::MonitorTick) == 12);
    CHECK(count(log, EventKind::NewPhaseDetected) == 0);
    CHECK(log.events.back().kind == EventKind::Finished);
    REQUIRE(log.phase_histories.size() == 1);
    CHECK(log.phase_histories[0].size() == 8);

    for (std::size_t i = 1; i < log.events.size(); ++i) CHECK(log.events[i - 1].interval <= log.events[i].interval);

    const auto chosen = std::find_if(log.events.begin(), log.events.end(),
                                     [](const auto& e) { return e.kind == EventKind::KnobChosen; });
    CHECK(chosen->interval == 8);
    CHECK(chosen->feasible);
    CHECK(*chosen->knob == select_best(log.phase_histories[0], sc.spec()).knob);

    // Every monitoring interval runs the chosen knob.
    const auto& tl = w.knob_timeline();
    REQUIRE(tl.size() == 20);
    for (int i = 8; i < 20; ++i) CHECK(tl[i] == *chosen->knob);
    CHECK(tl[0] == sc.space.default_setting());
}

TEST_CASE("phase change is detected and resampled")
{
    const auto sc = linear_board({20, 30}, 10.0, {10.0, 5.0});
    SimulatorBackedWorkload w(sc, 1);
    const auto log = control_loop(w, sc.space, sc.spec(), config(8, 3));

    CHECK(count(log, EventKind::PhaseStarted) == 2);
    CHECK(count(log, EventKind::NewPhaseDetected) == 1);
    const auto det = std::find_if(log.events.begin(), log.events.end(),
                                  [](const auto& e) { return e.kind == EventKind::NewPhaseDetected; });
    // Two consecutive deviating intervals: 20 and 21.
    CHECK(det->interval == 21);
    CHECK(log.phase_histories.size() == 2);
    CHECK(log.phase_histories[1].size() == 8);
    const auto second = std::find_if(det, log.events.end(),
                                     [](const auto& e) { return e.kind == EventKind::PhaseStarted; });
    REQUIRE(second != log.events.end());
    CHECK(second->interval == 22);
    CHECK(second->phase == 1);
}

TEST_CASE("workload ending during sampling truncates the phase")
{
    const auto sc = linear_board({5}, 10.0, {10.0});
    SimulatorBackedWorkload w(sc, 1);
    const auto log = control_loop(w, sc.space, sc.spec(), config(8, 3));
    CHECK(log.phase_histories.at(0).size() == 5);
    CHECK(count(log, EventKind::KnobChosen) == 1);
    CHECK(count(log, EventKind::MonitorTick) == 0);
    CHECK_FALSE(log.aborted);
}

TEST_CASE("infeasible everywhere chooses the fallback")
{
    const auto sc = linear_board({15}, 0.5, {10.0});
    SimulatorBackedWorkload w(sc, 1);
    const auto log = control_loop(w, sc.space, sc.spec(), config(8, 3));
    const auto chosen = std::find_if(log.events.begin(), log.events.end(),
                                     [](const auto& e) { return e.kind == EventKind::KnobChosen; });
    REQUIRE(chosen != log.events.end());
    CHECK_FALSE(chosen->feasible);
    // Least power among the samples.
    double least = 1e300;
    for (const auto& m : log.phase_histories[0]) least = std::min(least, m.constraints[0]);
    CHECK(chosen->reading->constraints[0] == least);
}

TEST_CASE("timeouts")
{
    const auto sc = linear_board({20}, 10.0, {10.0});
    const Reading r{1.0, {2.0}};
    const IntervalResult ok{IntervalResult::Status::Ok, r};
    const IntervalResult to{IntervalResult::Status::Timeout, {}};

    SUBCASE("a single timeout is retried")
    {
        ScriptedWorkload w({ok, to, ok, ok, ok});
        const auto log = control_loop(w, sc.space, sc.spec(), config(4, 2));
        CHECK(log.phase_histories[0].size() == 4);
        CHECK_FALSE(log.aborted);
    }
    SUBCASE("two timeouts while monitoring abort the session")
    {
        ScriptedWorkload w({ok, ok, ok, ok, ok, to, to});
        const auto log = control_loop(w, sc.space, sc.spec(), config(4, 2));
        CHECK(log.aborted);
        CHECK(log.events.back().kind == EventKind::Finished);
        CHECK(count(log, EventKind::MonitorTick) == 1);
    }
    SUBCASE("two timeouts while sampling choose the best so far")
    {
        ScriptedWorkload w({ok, ok, to, to});
        const auto log = control_loop(w, sc.space, sc.spec(), config(4, 2));
        CHECK(log.phase_histories[0].size() == 2);
        CHECK(count(log, EventKind::KnobChosen) == 1);
    }
    SUBCASE("no measurement at all")
    {
        ScriptedWorkload w({to, to});
        const auto log = control_loop(w, sc.space, sc.spec(), config(4, 2));
        CHECK(log.aborted);
    }
}

TEST_CASE("warm start")
{
    const auto sc = linear_board({30}, 6.0, {10.0});
    SimulatorBackedWorkload cold_w(sc, 1);
    const auto cold = control_loop(cold_w, sc.space, sc.spec(), config(8, 3));
    auto cfg = config(8, 3);
    cfg.warm_start = cold.phase_histories[0];
    SimulatorBackedWorkload warm_w(sc, 1);
    const auto warm = control_loop(warm_w, sc.space, sc.spec(), cfg);
    CHECK(warm.phase_histories[0].size() == 8);
    CHECK(count(warm, EventKind::SampleRequested) == 8);
}

TEST_CASE("event log round trip")
{
    const auto sc = linear_board({20, 20}, 10.0, {10.0, 5.0});
    SimulatorBackedWorkload w(sc, 1);
    const auto log = control_loop(w, sc.space, sc.spec(), config(8, 3));
    std::stringstream ss;
    write_event_log(ss, log.events);
    const auto back = read_event_log(ss);
    CHECK(back == log.events);
    for (auto k : {EventKind::PhaseStarted, EventKind::SampleRequested, EventKind::SampleMeasured,
                   EventKind::KnobChosen, EventKind::MonitorTick, EventKind::NewPhaseDetected, EventKind::Finished}) {
        CHECK(parse_event_kind(to_string(k)) == k);
    }
    std::stringstream bad("{\"kind\":\"nope\",\"interval\":0,\"phase\":0}\n");
    CHECK_THROWS(read_event_log(bad));
}

TEST_CASE("same seed, same log")
{
    const auto sc = linear_board({40}, 6.0, {10.0});
    SimulatorBackedWorkload a(sc, 9), b(sc, 9);
    CHECK(control_loop(a, sc.space, sc.spec(), config(10, 3)).events ==
          control_loop(b, sc.space, sc.spec(), config(10, 3)).events);
}
