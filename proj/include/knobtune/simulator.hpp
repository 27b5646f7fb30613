#pragma once

#include "knobtune/json_io.hpp"
#include "knobtune/knob_space.hpp"
#include "knobtune/optimization.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace knobtune {

enum class SurfaceFamily { ParallelScaling, BumpMix, PowerModel, Tabulated };

std::string to_string(SurfaceFamily f);

/// A group of identical cores: its count knob, optional frequency knob, and a
/// per-core coefficient (throughput weight or dynamic power factor).
struct CoreGroup {
    std::string cores_dim;
    std::string frequency_dim;  // empty: always at full frequency
    double coefficient = 1.0;

    bool operator==(const CoreGroup&) const = default;
};

struct Bump {
    double amplitude = 0.0;
    std::vector<double> center;  // unit-cube coordinates
    double width = 0.1;

    bool operator==(const Bump&) const = default;
};

/// Response surface of one metric.
///
/// ParallelScaling: o = work / (serial_time + parallel_time / p_eff + overhead * p)
///   with p = total active cores and p_eff = sum coefficient * cores * f.
/// PowerModel: c = static_power + sum coefficient * f^3 * cores + per_core_power * p.
/// BumpMix: base + sum a * exp(-|x - mu|^2 / (2 s^2)) over unit-cube coordinates.
/// Tabulated: one value per setting in lexicographic order.
/// f is the frequency level divided by the highest level of its knob.
struct SurfaceSpec {
    SurfaceFamily family = SurfaceFamily::Tabulated;
    std::string metric;

    // Metric role. Objective surfaces carry `goal`; constraint surfaces carry
    // `bound` and `set_point`.
    std::optional<Goal> goal;
    std::optional<Bound> bound;
    std::optional<double> set_point;

    std::vector<CoreGroup> cores;
    double work = 1.0;
    double serial_time = 0.0;
    double parallel_time = 1.0;
    double overhead = 0.0;
    double static_power = 0.0;
    double per_core_power = 0.0;
    double base = 0.0;
    std::vector<Bump> bumps;
    std::vector<double> table;

    bool operator==(const SurfaceSpec&) const = default;
};

struct PhaseSpec {
    int length_intervals = 1;
    SurfaceSpec objective;
    std::vector<SurfaceSpec> constraints;

    bool operator==(const PhaseSpec&) const = default;
};

/// Metric values of one interval: objective plus one entry per constraint.
struct Reading {
    double objective = 0.0;
    std::vector<double> constraints;

    bool operator==(const Reading&) const = default;
};

struct Scenario {
    std::string name;
    KnobSpace space;
    std::vector<PhaseSpec> phases;
    double interval_seconds = 3.0;
    /// Coefficient of variation of the multiplicative noise, per metric
    /// (objective first). A single entry applies to every metric.
    std::vector<double> noise_cv{0.03};
    std::uint64_t seed = 0;

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;
    /// Objective/constraint roles taken from the first phase.
    OptimizationSpec spec() const;
    int total_intervals() const;
    /// Phase containing interval t (0-based). Throws ContractViolation past the end.
    std::size_t phase_at(int interval) const;
    /// First interval of phase p.
    int phase_start(std::size_t phase) const;
    double noise_for_metric(std::size_t metric) const;

    /// Compares everything but the name (which comes from the file name).
    bool operator==(const Scenario& other) const;
};

/// Deterministic 64-bit mix of two seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Noiseless value of a single surface.
double evaluate_surface(const SurfaceSpec& surface, const KnobSpace& space, const KnobSetting& k);

/// Noiseless objective and constraint values of phase `phase` at k.
Reading evaluate_true(const Scenario& scenario, std::size_t phase, const KnobSetting& k);

/// evaluate_true scaled by independent lognormal noise (median 1, CV per
/// metric). The draw depends only on (stream_seed, interval).
Reading measure(const Scenario& scenario, std::size_t phase, const KnobSetting& k,
                std::uint64_t stream_seed, std::uint64_t interval);

Json scenario_to_json(const Scenario& scenario);
/// Throws ConfigError with a path (and line for syntax errors) on bad input.
Scenario scenario_from_json(const Json& j);
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Directory holding the bundled scenarios (KNOBTUNE_SCENARIO_DIR overrides).
std::filesystem::path bundled_scenario_dir();
std::vector<std::string> bundled_scenario_names();
/// Loads `name_or_path` as a file if it exists, else as a bundled scenario name.
Scenario resolve_scenario(const std::string& name_or_path);

/// Simulated workload: steps through the scenario timeline one interval at a time.
class SimulatedWorkload {
public:
    SimulatedWorkload(const Scenario& scenario, std::uint64_t stream_seed);

    bool finished() const { return interval_ >= scenario_->total_intervals(); }
    int interval() const { return interval_; }
    std::size_t current_phase() const { return scenario_->phase_at(interval_); }
    /// Runs one interval with knob k and returns the noisy reading.
    Reading run_interval(const KnobSetting& k);

private:
    const Scenario* scenario_;
    std::uint64_t stream_seed_;
    int interval_ = 0;
};

}  // namespace knobtune
