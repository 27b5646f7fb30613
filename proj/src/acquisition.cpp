#include "knobtune/acquisition.hpp"

#include "knobtune/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace knobtune {

namespace {

constexpr double kMinSigma = 1e-12;

}  // namespace

double normal_pdf(double z)
{
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double expected_improvement(double mean, double variance, double incumbent, bool maximize)
{
    if (variance < 0.0) {
        throw ContractViolation("expected_improvement: negative variance");
    }
    const double gain = maximize ? mean - incumbent : incumbent - mean;
    const double sigma = std::sqrt(variance);
    if (sigma < kMinSigma) return std::max(gain, 0.0);
    const double z = gain / sigma;
    return std::max(gain * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

double prob_feasible(double mean, double variance, double set_point, Bound bound)
{
    if (variance < 0.0) {
        throw ContractViolation("prob_feasible: negative variance");
    }
    const double margin = bound == Bound::Below ? set_point - mean : mean - set_point;
    const double sigma = std::sqrt(variance);
    if (sigma < kMinSigma) return margin > 0.0 ? 1.0 : 0.0;
    return normal_cdf(margin / sigma);
}

double constrained_acquisition(const AcquisitionContext& ctx, std::span<const double> x)
{
    double pf = 1.0;
    for (const auto& c : ctx.constraint_models) {
        const auto p = c.model.predict(x);
        pf *= prob_feasible(p.mean, p.variance, c.set_point, c.bound);
        if (pf == 0.0) return 0.0;
    }
    if (!ctx.incumbent) return pf;
    const auto p = ctx.objective_model.predict(x);
    return expected_improvement(p.mean, p.variance, *ctx.incumbent, ctx.maximize) * pf;
}

KnobSetting argmax_acquisition(const AcquisitionContext& ctx, const KnobSpace& space,
                               const std::set<KnobSetting>& already_sampled)
{
    std::optional<KnobSetting> best;
    double best_value = 0.0;
    // Lexicographic enumeration with strict > keeps the smallest setting on ties.
    for (std::uint64_t i = 0; i < space.size(); ++i) {
        KnobSetting k = space.setting_at(i);
        if (already_sampled.contains(k)) continue;
        const double a = constrained_acquisition(ctx, normalize(space, k));
        if (!best || a > best_value) {
            best_value = a;
            best = std::move(k);
        }
    }
    if (!best) {
        throw ExhaustionError("every knob setting has already been sampled");
    }
    return *best;
}

}  // namespace knobtune
