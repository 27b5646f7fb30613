#pragma once

#include "knobtune/gp.hpp"
#include "knobtune/knob_space.hpp"
#include "knobtune/optimization.hpp"

#include <optional>
#include <set>
#include <span>
#include <vector>

namespace knobtune {

double normal_pdf(double z);
double normal_cdf(double z);

/// Closed-form EI of N(mean, variance) over `incumbent`. For minimization the
/// improvement is incumbent - value. Always >= 0.
double expected_improvement(double mean, double variance, double incumbent, bool maximize);

/// Posterior probability that the metric lands strictly on the feasible side
/// of `set_point`.
double prob_feasible(double mean, double variance, double set_point, Bound bound);

struct ConstraintModel {
    GPModel model;
    double set_point = 0.0;
    Bound bound = Bound::Below;
};

struct AcquisitionContext {
    GPModel objective_model;
    std::vector<ConstraintModel> constraint_models;
    /// Best feasible objective observed so far, raw units.
    std::optional<double> incumbent;
    bool maximize = true;
};

/// EI(x) times the product of feasibility probabilities. Without an
/// incumbent the product of feasibility probabilities alone.
double constrained_acquisition(const AcquisitionContext& ctx, std::span<const double> x);

/// Exhaustive scan of every setting not in `already_sampled`. Ties go to the
/// lexicographically smallest setting. Throws ExhaustionError when the whole
/// space has been sampled.
KnobSetting argmax_acquisition(const AcquisitionContext& ctx, const KnobSpace& space,
                               const std::set<KnobSetting>& already_sampled);

}  // namespace knobtune
