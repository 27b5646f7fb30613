#pragma once

#include "knobtune/knob_space.hpp"

#include <span>
#include <string>
#include <vector>

namespace knobtune {

enum class Goal { Maximize, Minimize };
/// Side of the set point a constraint metric must stay on.
enum class Bound { Below, Above };

std::string to_string(Goal g);
std::string to_string(Bound b);
Goal parse_goal(const std::string& s);
Bound parse_bound(const std::string& s);

struct ObjectiveSpec {
    std::string metric;
    Goal goal = Goal::Maximize;
    bool operator==(const ObjectiveSpec&) const = default;
};

struct ConstraintSpec {
    std::string metric;
    double set_point = 0.0;
    Bound bound = Bound::Below;

    /// Strictly on the feasible side of the set point.
    bool satisfied(double value) const;
    /// Positive excess over the set point divided by |set point|; 0 when satisfied.
    double normalized_violation(double value) const;

    bool operator==(const ConstraintSpec&) const = default;
};

/// What the controller optimizes: one objective and zero or more constraints.
struct OptimizationSpec {
    ObjectiveSpec objective;
    std::vector<ConstraintSpec> constraints;

    /// Throws ConfigError on duplicate metric names or a non-finite set point.
    void validate() const;

    bool maximize() const { return objective.goal == Goal::Maximize; }
    /// True when `a` is a strictly better objective value than `b`.
    bool better(double a, double b) const { return maximize() ? a > b : a < b; }
    bool feasible(std::span<const double> constraint_values) const;
    double total_violation(std::span<const double> constraint_values) const;

    bool operator==(const OptimizationSpec&) const = default;
};

/// One evaluated sample.
struct Measurement {
    KnobSetting knob;
    double objective = 0.0;
    std::vector<double> constraints;
    int round = 0;

    bool operator==(const Measurement&) const = default;
};

}  // namespace knobtune
