#include "knobtune/sampler.hpp"

#include "knobtune/error.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>

namespace knobtune {

namespace {

constexpr int kLhsRetries = 100;
constexpr double kRidgePenalty = 1e-3;

std::vector<std::vector<double>> normalized_inputs(const std::vector<Measurement>& data,
                                                   const KnobSpace& space)
{
    std::vector<std::vector<double>> xs;
    xs.reserve(data.size());
    for (const auto& m : data) xs.push_back(normalize(space, m.knob));
    return xs;
}

std::vector<double> objective_targets(const std::vector<Measurement>& data)
{
    std::vector<double> ys;
    ys.reserve(data.size());
    for (const auto& m : data) ys.push_back(m.objective);
    return ys;
}

std::vector<double> constraint_targets(const std::vector<Measurement>& data, std::size_t j)
{
    std::vector<double> ys;
    ys.reserve(data.size());
    for (const auto& m : data) ys.push_back(m.constraints.at(j));
    return ys;
}

GPModel fit_gp(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys)
{
    KernelConfig kernel;
    if (xs.size() >= 2) kernel = optimize_hyperparams(xs, ys, KernelKind::Matern52);
    return GPModel::fit(xs, ys, kernel);
}

KnobSetting nearest_unsampled(const KnobSpace& space, const KnobSetting& target,
                              const std::set<KnobSetting>& taken)
{
    std::optional<KnobSetting> best;
    int best_d = std::numeric_limits<int>::max();
    for (std::uint64_t i = 0; i < space.size(); ++i) {
        KnobSetting k = space.setting_at(i);
        if (taken.contains(k)) continue;
        const int d = switch_distance(k, target);
        if (d < best_d) {
            best_d = d;
            best = std::move(k);
        }
    }
    if (!best) throw ExhaustionError("no unsampled knob setting left");
    return *best;
}

}  // namespace

std::string to_string(Strategy s)
{
    switch (s) {
    case Strategy::Hybrid: return "hybrid";
    case Strategy::BayesOptOnly: return "bo";
    case Strategy::GPRegressor: return "gp";
    case Strategy::LinearRegressor: return "linear";
    case Strategy::Random: return "random";
    case Strategy::LHSOnly: return "lhs";
    }
    return "?";
}

std::string to_string(Stage s)
{
    switch (s) {
    case Stage::LHS: return "LHS";
    case Stage::GPRegressor: return "GP";
    case Stage::LinearRegressor: return "Linear";
    case Stage::BayesOpt: return "BO";
    case Stage::Random: return "Random";
    }
    return "?";
}

Strategy parse_strategy(const std::string& s)
{
    if (s == "hybrid" || s == "Hybrid") return Strategy::Hybrid;
    if (s == "bo" || s == "BayesOptOnly") return Strategy::BayesOptOnly;
    if (s == "gp" || s == "GPRegressor") return Strategy::GPRegressor;
    if (s == "linear" || s == "LinearRegressor") return Strategy::LinearRegressor;
    if (s == "random" || s == "Random") return Strategy::Random;
    if (s == "lhs" || s == "LHSOnly") return Strategy::LHSOnly;
    throw ConfigError("unknown strategy '" + s + "'");
}

int default_init_rounds(int total_rounds, Strategy strategy)
{
    int m = std::max(3, static_cast<int>(std::lround(total_rounds / 3.0)));
    const int cap = strategy == Strategy::Hybrid ? total_rounds - 2 : total_rounds - 1;
    return std::max(1, std::min(m, cap));
}

SamplingSchedule SamplingSchedule::with_default_init(int total_rounds, Strategy strategy)
{
    return {total_rounds, default_init_rounds(total_rounds, strategy), strategy};
}

void SamplingSchedule::validate() const
{
    if (init_rounds < 1 || init_rounds >= total_rounds) {
        throw ConfigError("sampling schedule needs 1 <= M < N (got M=" +
                          std::to_string(init_rounds) + ", N=" + std::to_string(total_rounds) +
                          ")");
    }
    if (strategy == Strategy::Hybrid && total_rounds < init_rounds + 2) {
        throw ConfigError("hybrid schedule needs N >= M + 2");
    }
}

Stage SamplingSchedule::stage(int round) const
{
    if (round < 1 || round > total_rounds) {
        throw PhaseCompleteError("round " + std::to_string(round) + " is outside the phase");
    }
    switch (strategy) {
    case Strategy::Random: return Stage::Random;
    case Strategy::LHSOnly: return Stage::LHS;
    default: break;
    }
    if (round <= init_rounds) return Stage::LHS;
    switch (strategy) {
    case Strategy::Hybrid:
        if (round == init_rounds + 1 || round == total_rounds) return Stage::GPRegressor;
        return Stage::BayesOpt;
    case Strategy::BayesOptOnly: return Stage::BayesOpt;
    case Strategy::GPRegressor: return Stage::GPRegressor;
    case Strategy::LinearRegressor: return Stage::LinearRegressor;
    default: return Stage::LHS;
    }
}

LhsDesign lhs_design(const KnobSpace& space, int count, std::uint64_t seed)
{
    if (count < 1) {
        throw ContractViolation("lhs_design: sample count must be positive");
    }
    if (static_cast<std::uint64_t>(count) > space.size()) {
        throw ExhaustionError("cannot draw " + std::to_string(count) +
                              " distinct settings from a space of " +
                              std::to_string(space.size()));
    }
    const std::size_t dims = space.dimension_count();
    const auto m = static_cast<std::size_t>(count);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // strata[d][i]: stratum of sample i along dimension d
    std::vector<std::vector<std::size_t>> strata(dims, std::vector<std::size_t>(m));
    for (auto& column : strata) {
        std::iota(column.begin(), column.end(), std::size_t{0});
        std::shuffle(column.begin(), column.end(), rng);
    }

    LhsDesign design;
    design.points.assign(m, std::vector<double>(dims));
    std::set<KnobSetting> taken;
    const auto jitter = [&](std::size_t i) {
        for (std::size_t d = 0; d < dims; ++d) {
            design.points[i][d] = (static_cast<double>(strata[d][i]) + unit(rng)) /
                                  static_cast<double>(m);
        }
    };
    for (std::size_t i = 0; i < m; ++i) {
        jitter(i);
        KnobSetting k = nearest_setting(space, design.points[i]);
        for (int retry = 0; taken.contains(k) && retry < kLhsRetries; ++retry) {
            jitter(i);
            k = nearest_setting(space, design.points[i]);
        }
        if (taken.contains(k)) k = nearest_unsampled(space, k, taken);
        taken.insert(k);
        design.settings.push_back(std::move(k));
    }

    const KnobSetting& def = space.default_setting();
    if (!taken.contains(def)) {
        std::size_t closest = 0;
        int closest_d = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < m; ++i) {
            const int d = switch_distance(design.settings[i], def);
            if (d < closest_d) {
                closest_d = d;
                closest = i;
            }
        }
        design.settings[closest] = def;
    }

    // Reorder points alongside settings so points[i] generated settings[i]
    // (the default keeps the point of the sample it replaced).
    std::vector<std::pair<KnobSetting, std::vector<double>>> pairs;
    for (std::size_t i = 0; i < m; ++i) pairs.emplace_back(design.settings[i], design.points[i]);
    design.settings = order_min_switch_distance(design.settings, def);
    for (std::size_t i = 0; i < m; ++i) {
        auto it = std::find_if(pairs.begin(), pairs.end(),
                               [&](const auto& p) { return p.first == design.settings[i]; });
        design.points[i] = it->second;
    }
    return design;
}

std::vector<KnobSetting> lhs_samples(const KnobSpace& space, int count, std::uint64_t seed)
{
    return lhs_design(space, count, seed).settings;
}

LinearModel LinearModel::fit(const std::vector<std::vector<double>>& inputs,
                             const std::vector<double>& targets, double penalty)
{
    if (inputs.empty() || inputs.size() != targets.size()) {
        throw ContractViolation("LinearModel::fit: need matching non-empty inputs and targets");
    }
    const std::size_t d = inputs.front().size();
    const std::size_t p = d + 1;  // intercept last
    detail::SquareMatrix a(p);
    std::vector<double> b(p, 0.0);
    std::vector<double> row(p);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != d) {
            throw ContractViolation("LinearModel::fit: inputs have mixed dimensionality");
        }
        std::copy(inputs[i].begin(), inputs[i].end(), row.begin());
        row[d] = 1.0;
        for (std::size_t r = 0; r < p; ++r) {
            b[r] += row[r] * targets[i];
            for (std::size_t c = 0; c < p; ++c) a(r, c) += row[r] * row[c];
        }
    }
    for (std::size_t r = 0; r < d; ++r) a(r, r) += penalty;
    // The intercept is unpenalized; a tiny ridge keeps the system definite
    // even when every input coordinate is constant.
    a(d, d) += 1e-12;
    if (!detail::cholesky(a)) {
        throw NumericalError("ridge normal equations are not positive definite");
    }
    detail::forward_substitute(a, b);
    detail::backward_substitute_transposed(a, b);

    LinearModel m;
    m.coef_.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(d));
    m.intercept_ = b[d];
    return m;
}

double LinearModel::predict(std::span<const double> x) const
{
    if (x.size() != coef_.size()) {
        throw ContractViolation("LinearModel::predict: dimensionality mismatch");
    }
    double y = intercept_;
    for (std::size_t i = 0; i < x.size(); ++i) y += coef_[i] * x[i];
    return y;
}

KnobSetting regressor_pick(const std::vector<Measurement>& history,
                           const std::vector<Measurement>& warm_start, const KnobSpace& space,
                           const OptimizationSpec& spec, RegressorKind kind)
{
    std::vector<Measurement> data = warm_start;
    data.insert(data.end(), history.begin(), history.end());
    if (data.size() < 2) {
        throw ContractViolation("regressor_pick needs at least two measurements");
    }
    const auto xs = normalized_inputs(data, space);
    const std::size_t nc = spec.constraints.size();

    std::vector<std::function<double(std::span<const double>)>> models;
    const auto add_model = [&](const std::vector<double>& ys) {
        if (kind == RegressorKind::GP) {
            models.emplace_back([gp = fit_gp(xs, ys)](std::span<const double> x) {
                return gp.predict(x).mean;
            });
        } else {
            models.emplace_back([lin = LinearModel::fit(xs, ys, kRidgePenalty)](
                                    std::span<const double> x) { return lin.predict(x); });
        }
    };
    add_model(objective_targets(data));
    for (std::size_t j = 0; j < nc; ++j) add_model(constraint_targets(data, j));

    std::set<KnobSetting> sampled;
    for (const auto& m : history) sampled.insert(m.knob);

    std::optional<KnobSetting> best_feasible;
    double best_obj = 0.0;
    std::optional<KnobSetting> least_violating;
    double least_violation = 0.0;
    std::vector<double> predicted(nc);
    for (std::uint64_t i = 0; i < space.size(); ++i) {
        KnobSetting k = space.setting_at(i);
        if (sampled.contains(k)) continue;
        const auto x = normalize(space, k);
        for (std::size_t j = 0; j < nc; ++j) predicted[j] = models[j + 1](x);
        if (spec.feasible(predicted)) {
            const double o = models[0](x);
            if (!best_feasible || spec.better(o, best_obj)) {
                best_obj = o;
                best_feasible = k;
            }
        } else if (!best_feasible) {
            const double v = spec.total_violation(predicted);
            if (!least_violating || v < least_violation) {
                least_violation = v;
                least_violating = k;
            }
        }
    }
    if (best_feasible) return *best_feasible;
    if (least_violating) return *least_violating;
    throw ExhaustionError("every knob setting has already been sampled");
}

BestChoice select_best(const std::vector<Measurement>& history, const OptimizationSpec& spec)
{
    if (history.empty()) {
        throw ContractViolation("select_best: empty history");
    }
    const Measurement* best = nullptr;
    for (const auto& m : history) {
        if (!spec.feasible(m.constraints)) continue;
        if (!best || spec.better(m.objective, best->objective)) best = &m;
    }
    if (best) return {best->knob, best->objective, best->constraints, true};

    const Measurement* least = &history.front();
    double least_v = spec.total_violation(least->constraints);
    for (const auto& m : history) {
        const double v = spec.total_violation(m.constraints);
        if (v < least_v) {
            least_v = v;
            least = &m;
        }
    }
    return {least->knob, least->objective, least->constraints, false};
}

AcquisitionContext build_acquisition_context(const std::vector<Measurement>& data,
                                             const KnobSpace& space,
                                             const OptimizationSpec& spec)
{
    if (data.empty()) {
        throw ContractViolation("Bayesian optimization needs at least one measurement");
    }
    const auto xs = normalized_inputs(data, space);
    AcquisitionContext ctx{fit_gp(xs, objective_targets(data)), {}, std::nullopt,
                           spec.maximize()};
    for (std::size_t j = 0; j < spec.constraints.size(); ++j) {
        const auto& c = spec.constraints[j];
        ctx.constraint_models.push_back({fit_gp(xs, constraint_targets(data, j)), c.set_point,
                                         c.bound});
    }
    for (const auto& m : data) {
        if (!spec.feasible(m.constraints)) continue;
        if (!ctx.incumbent || spec.better(m.objective, *ctx.incumbent)) {
            ctx.incumbent = m.objective;
        }
    }
    return ctx;
}

Sampler::Sampler(SamplingSchedule schedule, KnobSpace space, OptimizationSpec spec,
                 std::uint64_t seed, std::vector<Measurement> warm_start)
    : schedule_(schedule),
      space_(std::move(space)),
      spec_(std::move(spec)),
      seed_(seed),
      warm_start_(std::move(warm_start)),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL)
{
    schedule_.validate();
    spec_.validate();
    if (static_cast<std::uint64_t>(schedule_.total_rounds) > space_.size()) {
        throw ConfigError("sampling budget N exceeds the knob space size");
    }
    for (const auto& m : warm_start_) {
        space_.check(m.knob);
        if (m.constraints.size() != spec_.constraints.size()) {
            throw ContractViolation("warm-start measurement has the wrong constraint count");
        }
    }
    if (schedule_.strategy == Strategy::LHSOnly) {
        lhs_ = lhs_samples(space_, schedule_.total_rounds, seed_);
    } else if (schedule_.strategy != Strategy::Random) {
        lhs_ = lhs_samples(space_, schedule_.init_rounds, seed_);
    }
}

Stage Sampler::next_stage() const
{
    if (complete()) throw PhaseCompleteError("sampling phase already complete");
    return schedule_.stage(round() + 1);
}

std::vector<Measurement> Sampler::model_data() const
{
    std::vector<Measurement> data = warm_start_;
    data.insert(data.end(), history_.begin(), history_.end());
    return data;
}

KnobSetting Sampler::pick_random()
{
    std::uniform_int_distribution<std::uint64_t> pick(0, space_.size() - 1);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        KnobSetting k = space_.setting_at(pick(rng_));
        if (!sampled_.contains(k)) return k;
    }
    return nearest_unsampled(space_, space_.setting_at(pick(rng_)), sampled_);
}

KnobSetting Sampler::pick_bayes_opt() const
{
    return argmax_acquisition(build_acquisition_context(model_data(), space_, spec_), space_,
                              sampled_);
}

KnobSetting Sampler::next_sample()
{
    const Stage stage = next_stage();
    const std::size_t data_size = warm_start_.size() + history_.size();
    switch (stage) {
    case Stage::LHS: return lhs_.at(history_.size());
    case Stage::Random: return pick_random();
    case Stage::BayesOpt: return pick_bayes_opt();
    case Stage::GPRegressor:
    case Stage::LinearRegressor:
        // Regressors need two points; with a single initial sample use BO.
        if (data_size < 2) return pick_bayes_opt();
        return regressor_pick(history_, warm_start_, space_, spec_,
                              stage == Stage::GPRegressor ? RegressorKind::GP
                                                          : RegressorKind::Linear);
    }
    throw ContractViolation("unknown sampling stage");
}

void Sampler::record(Measurement m)
{
    if (complete()) throw PhaseCompleteError("sampling phase already complete");
    space_.check(m.knob);
    if (m.constraints.size() != spec_.constraints.size()) {
        throw ContractViolation("measurement has the wrong constraint count");
    }
    if (!std::isfinite(m.objective) ||
        !std::all_of(m.constraints.begin(), m.constraints.end(),
                     [](double c) { return std::isfinite(c); })) {
        throw ContractViolation("measurement values must be finite");
    }
    if (!sampled_.insert(m.knob).second) {
        throw ContractViolation("knob " + to_string(m.knob) + " was already sampled");
    }
    m.round = round() + 1;
    history_.push_back(std::move(m));
}

}  // namespace knobtune
