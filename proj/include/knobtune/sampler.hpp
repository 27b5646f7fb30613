#pragma once

#include "knobtune/acquisition.hpp"
#include "knobtune/gp.hpp"
#include "knobtune/knob_space.hpp"
#include "knobtune/optimization.hpp"

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace knobtune {

enum class Strategy { Hybrid, BayesOptOnly, GPRegressor, LinearRegressor, Random, LHSOnly };

/// How a single sampling round picks its knob.
enum class Stage { LHS, GPRegressor, LinearRegressor, BayesOpt, Random };

std::string to_string(Strategy s);
std::string to_string(Stage s);
/// Accepts hybrid, bo, gp, linear, random, lhs (and the enum spellings).
Strategy parse_strategy(const std::string& s);

/// max(3, round(N/3)), capped so the schedule stays valid for small N.
int default_init_rounds(int total_rounds, Strategy strategy = Strategy::Hybrid);

struct SamplingSchedule {
    int total_rounds = 12;
    int init_rounds = 4;
    Strategy strategy = Strategy::Hybrid;

    static SamplingSchedule with_default_init(int total_rounds, Strategy strategy);

    /// Throws ConfigError unless 1 <= M < N (and N >= M + 2 for Hybrid).
    void validate() const;
    /// Stage used at 1-based round r.
    Stage stage(int round) const;
};

/// Continuous Latin hypercube in the unit cube and its grid projection.
struct LhsDesign {
    std::vector<std::vector<double>> points;  // pre-rounding, one per sample
    std::vector<KnobSetting> settings;        // emitted order
};

/// M distinct settings from a stratified design: the default setting replaces
/// its closest generated point and the list is ordered to minimize knob
/// switches starting from the default. Throws ExhaustionError if M exceeds
/// the space size.
LhsDesign lhs_design(const KnobSpace& space, int count, std::uint64_t seed);
std::vector<KnobSetting> lhs_samples(const KnobSpace& space, int count, std::uint64_t seed);

/// Ridge least squares on unit-cube inputs with an unpenalized intercept.
class LinearModel {
public:
    static LinearModel fit(const std::vector<std::vector<double>>& inputs,
                           const std::vector<double>& targets, double penalty = 1e-3);
    double predict(std::span<const double> x) const;
    const std::vector<double>& coefficients() const { return coef_; }
    double intercept() const { return intercept_; }

private:
    std::vector<double> coef_;
    double intercept_ = 0.0;
};

enum class RegressorKind { GP, Linear };

/// Fits one regressor per metric and returns the unsampled setting with the
/// best predicted objective among those predicted feasible, falling back to
/// the least predicted normalized violation. Requires >= 2 measurements in
/// history + warm_start.
KnobSetting regressor_pick(const std::vector<Measurement>& history,
                           const std::vector<Measurement>& warm_start, const KnobSpace& space,
                           const OptimizationSpec& spec, RegressorKind kind);

struct BestChoice {
    KnobSetting knob;
    double o_ref = 0.0;
    std::vector<double> c_ref;
    /// False when no measurement met every constraint (least-violation fallback).
    bool feasible = true;
};

/// Best measured-feasible sample; ties keep the earliest measurement.
BestChoice select_best(const std::vector<Measurement>& history, const OptimizationSpec& spec);

/// Constrained-BO context built from every measurement seen so far.
AcquisitionContext build_acquisition_context(const std::vector<Measurement>& data,
                                             const KnobSpace& space,
                                             const OptimizationSpec& spec);

/// Per-phase sampling state: one owner, one phase.
class Sampler {
public:
    Sampler(SamplingSchedule schedule, KnobSpace space, OptimizationSpec spec,
            std::uint64_t seed, std::vector<Measurement> warm_start = {});

    /// Knob for the next round. Throws PhaseCompleteError once N rounds are
    /// recorded. Never returns a knob already in the history.
    KnobSetting next_sample();
    /// Stage that next_sample will use.
    Stage next_stage() const;
    void record(Measurement m);

    int round() const { return static_cast<int>(history_.size()); }
    bool complete() const { return round() >= schedule_.total_rounds; }
    const std::vector<Measurement>& history() const { return history_; }
    const std::vector<Measurement>& warm_start() const { return warm_start_; }
    const SamplingSchedule& schedule() const { return schedule_; }
    const KnobSpace& space() const { return space_; }
    const OptimizationSpec& spec() const { return spec_; }

private:
    std::vector<Measurement> model_data() const;
    KnobSetting pick_random();
    KnobSetting pick_bayes_opt() const;

    SamplingSchedule schedule_;
    KnobSpace space_;
    OptimizationSpec spec_;
    std::uint64_t seed_;
    std::vector<Measurement> warm_start_;
    std::vector<Measurement> history_;
    std::set<KnobSetting> sampled_;
    std::vector<KnobSetting> lhs_;
    std::mt19937_64 rng_;
};

}  // namespace knobtune
