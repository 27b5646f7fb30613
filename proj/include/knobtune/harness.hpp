#pragma once

#include "knobtune/controller.hpp"
#include "knobtune/optimization.hpp"
#include "knobtune/sampler.hpp"
#include "knobtune/session.hpp"
#include "knobtune/simulator.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace knobtune {

struct OracleResult {
    KnobSetting knob;
    double value = 0.0;  // true objective at knob
    Reading reading;
};

/// Exhaustive scan of the noiseless surfaces of one scenario phase. Ties keep
/// the first setting in lexicographic order. Throws ConfigError above 10^6
/// settings and OracleInfeasibleError when nothing meets every constraint.
OracleResult brute_force_oracle(const Scenario& scenario, std::size_t phase, const OptimizationSpec& spec);
OracleResult brute_force_oracle(const Scenario& scenario, std::size_t phase);

inline constexpr std::uint64_t kOracleLimit = 1'000'000;

/// Percent QoS: ctrl/oracle for maximization, oracle/ctrl for minimization.
/// Throws UndefinedQoSError when the denominator is zero.
double qos(double expected_ctrl, double expected_oracle, Goal goal);

/// One knob decision made by the controller.
struct ChoiceRecord {
    int interval = 0;  // first interval run with the knob
    std::size_t scenario_phase = 0;
    KnobSetting knob;
    bool fallback = false;        // no sampled knob measured feasible
    bool truly_feasible = false;  // under the noiseless surfaces of that phase
};

/// Outcome of one trial within one scenario phase.
struct PhaseOutcome {
    std::size_t phase = 0;
    std::optional<KnobSetting> chosen;  // knob of the last monitoring interval
    bool feasible = false;              // chosen knob truly feasible
    std::optional<double> e_obj_post;   // mean true objective, feasible monitoring intervals
    std::optional<double> e_obj_incl;   // same, sampling intervals included
    double violation_rate = 0.0;        // infeasible share of monitoring intervals
    int post_intervals = 0;
};

struct TrialRecord {
    std::string scenario;
    Strategy strategy = Strategy::Hybrid;
    std::uint64_t seed = 0;
    std::vector<IntervalRecord> intervals;
    std::vector<ChoiceRecord> choices;
    std::vector<PhaseOutcome> phases;
    std::vector<ControllerEvent> events;
    std::vector<std::vector<Measurement>> histories;
    bool aborted = false;
    std::string error;
};

struct QoSReport {
    std::string scenario;
    Strategy strategy = Strategy::Hybrid;
    double mean_qos_post = 0.0;
    double mean_qos_incl = 0.0;
    double violation_rate = 0.0;
    int n_trials = 0;
    int n_defined = 0;  // trials with a defined post-choice QoS
    std::vector<std::optional<double>> per_seed_post;
    std::vector<std::optional<double>> per_seed_incl;
};

struct ExperimentConfig {
    Scenario scenario;
    std::vector<Strategy> strategies{Strategy::Hybrid};
    std::vector<std::uint64_t> seeds{0};
    int total_rounds = 12;
    int init_rounds = 0;  // 0: default for N
    double threshold = 0.10;
    int consecutive_required = 2;
    /// Warm-start each trial with the first-phase history of one prior trial
    /// of the same strategy (run with a derived seed).
    bool warm_start_from_prior = false;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct ExperimentResult {
    std::vector<OracleResult> oracles;  // one per scenario phase
    std::vector<TrialRecord> trials;    // strategy-major, then seed order
    std::vector<QoSReport> reports;     // one per strategy
};

/// Runs one trial end to end: server and simulated client over an
/// in-process channel.
TrialRecord run_trial(const Scenario& scenario, Strategy strategy, std::uint64_t seed,
                      const ExperimentConfig& config, std::vector<Measurement> warm_start = {});

/// Fills choices and phases of a trial from its interval timeline and events.
void analyze_trial(TrialRecord& trial, const Scenario& scenario);

/// Per-trial QoS averaged over scenario phases. A phase without a feasible
/// interval has no conditional expectation and is skipped; nullopt when no
/// phase is defined.
std::optional<double> trial_qos(const TrialRecord& trial, const std::vector<OracleResult>& oracles, Goal goal,
                                bool including_sampling = false);

QoSReport summarize(const std::string& scenario, Strategy strategy, const std::vector<TrialRecord>& trials,
                    const std::vector<OracleResult>& oracles, Goal goal);

ExperimentResult run_experiment(const ExperimentConfig& config);

/// trials.csv: one row per (trial, scenario phase).
void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials);
/// summary.csv: one row per strategy.
void write_summary_csv(std::ostream& out, const std::vector<QoSReport>& reports);

/// A trials.csv row read back.
struct TrialRow {
    std::string scenario;
    std::string strategy;
    std::uint64_t seed = 0;
    std::size_t phase = 0;
    std::string chosen_knob;
    bool feasible = false;
    std::optional<double> e_obj_post;
    std::optional<double> e_obj_incl;
    double violation_rate = 0.0;
};

/// Throws ConfigError on a malformed file.
std::vector<TrialRow> read_trials_csv(std::istream& in);

/// Recomputes the summary of a trials.csv given the scenario it came from.
std::vector<QoSReport> summarize_rows(const std::vector<TrialRow>& rows, const Scenario& scenario);

}  // namespace knobtune
