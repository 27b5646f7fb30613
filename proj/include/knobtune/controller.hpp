#pragma once

#include "knobtune/json_io.hpp"
#include "knobtune/knob_space.hpp"
#include "knobtune/optimization.hpp"
#include "knobtune/sampler.hpp"
#include "knobtune/simulator.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace knobtune {

/// Watches monitoring readings against the chosen knob's sampling-phase
/// measurement and flags a new phase after `consecutive_required` intervals
/// in a row deviating by more than `threshold`.
struct PhaseDetector {
    double reference_o = 0.0;
    std::vector<double> reference_c;
    double threshold = 0.10;
    int consecutive_required = 2;
    int violation_streak = 0;

    static PhaseDetector from_choice(const BestChoice& choice, double threshold = 0.10,
                                     int consecutive_required = 2);
    /// Throws ConfigError unless 0 < threshold < 1 and consecutive_required >= 1.
    void validate() const;
    /// Largest relative deviation over all metrics.
    double distance(double o, std::span<const double> c) const;
};

enum class MonitorVerdict { Stay, NewPhase };

/// Updates the streak; NewPhase exactly when it reaches consecutive_required,
/// after which the streak is reset.
MonitorVerdict monitor_step(PhaseDetector& detector, double o, std::span<const double> c);

enum class EventKind {
    PhaseStarted,
    SampleRequested,
    SampleMeasured,
    KnobChosen,
    MonitorTick,
    NewPhaseDetected,
    Finished
};

std::string to_string(EventKind k);
EventKind parse_event_kind(const std::string& s);

struct ControllerEvent {
    EventKind kind = EventKind::PhaseStarted;
    int interval = 0;
    int phase = 0;  // controller sampling phase, 0-based
    int round = 0;  // sampling round for SampleRequested/SampleMeasured
    std::optional<KnobSetting> knob;
    std::optional<Reading> reading;
    bool feasible = true;  // KnobChosen: false for the least-violation fallback
    std::string note;

    bool operator==(const ControllerEvent&) const = default;
};

Json event_to_json(const ControllerEvent& e);
ControllerEvent event_from_json(const Json& j);
/// One JSON object per line.
void write_event_log(std::ostream& out, std::span<const ControllerEvent> events);
std::vector<ControllerEvent> read_event_log(std::istream& in);

struct IntervalResult {
    enum class Status { Ok, Timeout, Ended };
    Status status = Status::Ok;
    Reading reading;
};

/// What the controller drives: either a local simulator or a remote client.
class ControlledWorkload {
public:
    virtual ~ControlledWorkload() = default;
    /// Called when a new phase is detected, before its first sample.
    virtual void begin_new_phase() = 0;
    virtual void apply_sample(const KnobSetting& knob, int round) = 0;
    virtual void apply_chosen(const BestChoice& choice) = 0;
    /// Runs one measurement interval. Ended means the workload is over.
    /// Throws SessionError on transport failure.
    virtual IntervalResult measure() = 0;
};

/// Controller backed directly by a SimulatedWorkload.
class SimulatorBackedWorkload : public ControlledWorkload {
public:
    SimulatorBackedWorkload(const Scenario& scenario, std::uint64_t stream_seed);

    void begin_new_phase() override {}
    void apply_sample(const KnobSetting& knob, int) override { knob_ = knob; }
    void apply_chosen(const BestChoice& choice) override { knob_ = choice.knob; }
    IntervalResult measure() override;

    /// Knob used for every interval run so far.
    const std::vector<KnobSetting>& knob_timeline() const { return timeline_; }

private:
    SimulatedWorkload sim_;
    std::optional<KnobSetting> knob_;
    std::vector<KnobSetting> timeline_;
};

struct ControllerConfig {
    SamplingSchedule schedule;
    double threshold = 0.10;
    int consecutive_required = 2;
    std::uint64_t seed = 0;
    /// Prior measurements that seed the first phase's models.
    std::vector<Measurement> warm_start;

    void validate() const;
};

struct ControllerLog {
    std::vector<ControllerEvent> events;
    /// Sampling history of every phase, in order.
    std::vector<std::vector<Measurement>> phase_histories;
    bool aborted = false;
    std::string error;
};

/// Outer control loop: sample a phase, apply the best knob, monitor until the
/// phase detector fires or the workload ends. Transport failures end the
/// loop with a partial log (aborted = true).
ControllerLog control_loop(ControlledWorkload& workload, const KnobSpace& space,
                           const OptimizationSpec& spec, const ControllerConfig& config);

}  // namespace knobtune
