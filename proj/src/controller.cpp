#include "knobtune/controller.hpp"

#include "knobtune/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace knobtune {

using namespace json_detail;

PhaseDetector PhaseDetector::from_choice(const BestChoice& choice, double threshold,
                                         int consecutive_required)
{
    PhaseDetector d{choice.o_ref, choice.c_ref, threshold, consecutive_required, 0};
    d.validate();
    return d;
}

void PhaseDetector::validate() const
{
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("phase detector threshold must be in (0, 1)");
    }
    if (consecutive_required < 1) {
        throw ConfigError("phase detector needs consecutive_required >= 1");
    }
}

double PhaseDetector::distance(double o, std::span<const double> c) const
{
    if (c.size() != reference_c.size()) {
        throw ContractViolation("phase detector: constraint count mismatch");
    }
    const auto rel = [](double v, double ref) { return std::abs(v - ref) / std::max(std::abs(ref), 1e-9); };
    double d = rel(o, reference_o);
    for (std::size_t i = 0; i < c.size(); ++i) d = std::max(d, rel(c[i], reference_c[i]));
    return d;
}

MonitorVerdict monitor_step(PhaseDetector& detector, double o, std::span<const double> c)
{
    if (detector.distance(o, c) > detector.threshold) {
        ++detector.violation_streak;
    } else {
        detector.violation_streak = 0;
    }
    if (detector.violation_streak >= detector.consecutive_required) {
        detector.violation_streak = 0;
        return MonitorVerdict::NewPhase;
    }
    return MonitorVerdict::Stay;
}

std::string to_string(EventKind k)
{
    switch (k) {
    case EventKind::PhaseStarted: return "phase_started";
    case EventKind::SampleRequested: return "sample_requested";
    case EventKind::SampleMeasured: return "sample_measured";
    case EventKind::KnobChosen: return "knob_chosen";
    case EventKind::MonitorTick: return "monitor_tick";
    case EventKind::NewPhaseDetected: return "new_phase_detected";
    case EventKind::Finished: return "finished";
    }
    return "?";
}

EventKind parse_event_kind(const std::string& s)
{
    for (auto k : {EventKind::PhaseStarted, EventKind::SampleRequested, EventKind::SampleMeasured,
                   EventKind::KnobChosen, EventKind::MonitorTick, EventKind::NewPhaseDetected,
                   EventKind::Finished}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown event kind '" + s + "'");
}

Json event_to_json(const ControllerEvent& e)
{
    Json j{{"event", to_string(e.kind)}, {"interval", e.interval}, {"phase", e.phase}};
    if (e.round) j["round"] = e.round;
    if (e.knob) j["knob"] = setting_to_json(*e.knob);
    if (e.reading) {
        j["o"] = e.reading->objective;
        j["c"] = e.reading->constraints;
    }
    if (e.kind == EventKind::KnobChosen) j["feasible"] = e.feasible;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
}

ControllerEvent event_from_json(const Json& j)
{
    reject_unknown(j, {"event", "interval", "phase", "round", "knob", "o", "c", "feasible", "note"}, "event");
    ControllerEvent e;
    e.kind = parse_event_kind(text(require(j, "event", "event"), "event.event"));
    e.interval = integer(require(j, "interval", "event"), "event.interval");
    e.phase = integer(require(j, "phase", "event"), "event.phase");
    if (j.contains("round")) e.round = integer(j.at("round"), "event.round");
    if (j.contains("knob")) e.knob = setting_from_json(j.at("knob"));
    if (j.contains("o")) {
        Reading r;
        r.objective = number(j.at("o"), "event.o");
        const Json& c = require(j, "c", "event");
        if (!c.is_array()) throw ConfigError("event.c: expected an array");
        for (const auto& v : c) r.constraints.push_back(number(v, "event.c"));
        e.reading = std::move(r);
    }
    if (j.contains("feasible")) {
        if (!j.at("feasible").is_boolean()) throw ConfigError("event.feasible: expected a boolean");
        e.feasible = j.at("feasible").get<bool>();
    }
    if (j.contains("note")) e.note = text(j.at("note"), "event.note");
    return e;
}

void write_event_log(std::ostream& out, std::span<const ControllerEvent> events)
{
    for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

std::vector<ControllerEvent> read_event_log(std::istream& in)
{
    std::vector<ControllerEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        events.push_back(event_from_json(Json::parse(line)));
    }
    return events;
}

SimulatorBackedWorkload::SimulatorBackedWorkload(const Scenario& scenario, std::uint64_t stream_seed)
    : sim_(scenario, stream_seed)
{
}

IntervalResult SimulatorBackedWorkload::measure()
{
    if (sim_.finished()) return {IntervalResult::Status::Ended, {}};
    if (!knob_) throw ContractViolation("no knob applied before measuring");
    timeline_.push_back(*knob_);
    return {IntervalResult::Status::Ok, sim_.run_interval(*knob_)};
}

void ControllerConfig::validate() const
{
    schedule.validate();
    PhaseDetector{0.0, {}, threshold, consecutive_required, 0}.validate();
}

namespace {

// Mutable state of one control loop run.
class Loop {
public:
    Loop(ControlledWorkload& w, const KnobSpace& space, const OptimizationSpec& spec,
         const ControllerConfig& config)
        : w_(w), space_(space), spec_(spec), config_(config)
    {
    }

    ControllerLog run()
    {
        try {
            for (int phase = 0;; ++phase) {
                if (phase > 0) w_.begin_new_phase();
                if (!run_phase(phase)) break;
                if (!monitor(phase)) break;
            }
            emit({EventKind::Finished, interval_, phase_});
        } catch (const SessionError& e) {
            log_.aborted = true;
            log_.error = e.what();
            emit({EventKind::Finished, interval_, phase_, 0, {}, {}, true, "aborted: " + log_.error});
        }
        return std::move(log_);
    }

private:
    void emit(ControllerEvent e) { log_.events.push_back(std::move(e)); }

    // Timeout is retried once; a second timeout is reported as Timeout.
    IntervalResult measure_with_retry()
    {
        IntervalResult r = w_.measure();
        if (r.status == IntervalResult::Status::Timeout) r = w_.measure();
        return r;
    }

    // Returns false when the workload ended during the phase.
    bool run_phase(int phase)
    {
        phase_ = phase;
        emit({EventKind::PhaseStarted, interval_, phase});
        Sampler sampler(config_.schedule, space_, spec_, mix_seed(config_.seed, static_cast<std::uint64_t>(phase)),
                        phase == 0 ? config_.warm_start : std::vector<Measurement>{});
        bool ended = false;
        bool timed_out = false;
        while (!sampler.complete()) {
            const int round = sampler.round() + 1;
            KnobSetting k = sampler.next_sample();
            emit({EventKind::SampleRequested, interval_, phase, round, k});
            w_.apply_sample(k, round);
            const IntervalResult r = measure_with_retry();
            if (r.status == IntervalResult::Status::Ended) {
                ended = true;
                break;
            }
            if (r.status == IntervalResult::Status::Timeout) {
                timed_out = true;
                break;
            }
            sampler.record({k, r.reading.objective, r.reading.constraints, round});
            emit({EventKind::SampleMeasured, interval_, phase, round, k, r.reading});
            ++interval_;
        }
        log_.phase_histories.push_back(sampler.history());
        if (sampler.history().empty()) {
            if (timed_out) throw SessionError("no measurement arrived before the timeout");
            return false;
        }
        choice_ = select_best(sampler.history(), spec_);
        w_.apply_chosen(*choice_);
        std::string note;
        if (ended) note = "workload ended during sampling";
        if (timed_out) note = "measurement timeout; best so far";
        emit({EventKind::KnobChosen, interval_, phase, 0, choice_->knob,
              Reading{choice_->o_ref, choice_->c_ref}, choice_->feasible, note});
        return !ended;
    }

    // Returns false when the workload ended.
    bool monitor(int phase)
    {
        PhaseDetector detector =
            PhaseDetector::from_choice(*choice_, config_.threshold, config_.consecutive_required);
        for (;;) {
            const IntervalResult r = measure_with_retry();
            if (r.status == IntervalResult::Status::Ended) return false;
            if (r.status == IntervalResult::Status::Timeout) {
                throw SessionError("monitoring report timed out");
            }
            emit({EventKind::MonitorTick, interval_, phase, 0, choice_->knob, r.reading});
            const auto verdict = monitor_step(detector, r.reading.objective, r.reading.constraints);
            if (verdict == MonitorVerdict::NewPhase) {
                emit({EventKind::NewPhaseDetected, interval_, phase});
                ++interval_;
                return true;
            }
            ++interval_;
        }
    }

    ControlledWorkload& w_;
    const KnobSpace& space_;
    const OptimizationSpec& spec_;
    const ControllerConfig& config_;
    ControllerLog log_;
    std::optional<BestChoice> choice_;
    int interval_ = 0;
    int phase_ = 0;
};

}  // namespace

ControllerLog control_loop(ControlledWorkload& workload, const KnobSpace& space,
                           const OptimizationSpec& spec, const ControllerConfig& config)
{
    config.validate();
    spec.validate();
    return Loop(workload, space, spec, config).run();
}

}  // namespace knobtune
