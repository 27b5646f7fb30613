#include "knobtune/optimization.hpp"

#include "knobtune/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace knobtune {

std::string to_string(Goal g)
{
    return g == Goal::Maximize ? "maximize" : "minimize";
}

std::string to_string(Bound b)
{
    return b == Bound::Below ? "below" : "above";
}

Goal parse_goal(const std::string& s)
{
    if (s == "maximize") return Goal::Maximize;
    if (s == "minimize") return Goal::Minimize;
    throw ConfigError("unknown objective direction '" + s + "'");
}

Bound parse_bound(const std::string& s)
{
    if (s == "below") return Bound::Below;
    if (s == "above") return Bound::Above;
    throw ConfigError("unknown constraint direction '" + s + "'");
}

bool ConstraintSpec::satisfied(double value) const
{
    return bound == Bound::Below ? value < set_point : value > set_point;
}

double ConstraintSpec::normalized_violation(double value) const
{
    const double excess = bound == Bound::Below ? value - set_point : set_point - value;
    if (satisfied(value)) return 0.0;
    // Sitting exactly on the set point is infeasible but has zero excess.
    return std::max(excess, 0.0) / std::max(std::abs(set_point), 1e-9);
}

void OptimizationSpec::validate() const
{
    if (objective.metric.empty()) {
        throw ConfigError("objective metric needs a name");
    }
    std::set<std::string> names{objective.metric};
    for (const auto& c : constraints) {
        if (c.metric.empty()) {
            throw ConfigError("constraint metric needs a name");
        }
        if (!names.insert(c.metric).second) {
            throw ConfigError("duplicate metric name '" + c.metric + "'");
        }
        if (!std::isfinite(c.set_point)) {
            throw ConfigError("constraint '" + c.metric + "' has a non-finite set point");
        }
    }
}

bool OptimizationSpec::feasible(std::span<const double> constraint_values) const
{
    if (constraint_values.size() != constraints.size()) {
        throw ContractViolation("constraint value count does not match the spec");
    }
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        if (!constraints[i].satisfied(constraint_values[i])) return false;
    }
    return true;
}

double OptimizationSpec::total_violation(std::span<const double> constraint_values) const
{
    if (constraint_values.size() != constraints.size()) {
        throw ContractViolation("constraint value count does not match the spec");
    }
    double v = 0.0;
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        v += constraints[i].normalized_violation(constraint_values[i]);
    }
    return v;
}

}  // namespace knobtune
