#include "knobtune/gp.hpp"

#include "knobtune/error.hpp"
#include "linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace knobtune {

namespace {

constexpr double kInitialJitter = 1e-8;
constexpr double kMaxJitter = 1e-2;
constexpr double kMinStd = 1e-12;

}  // namespace

void KernelConfig::validate() const
{
    if (length_scales.empty()) {
        throw ContractViolation("kernel needs at least one length scale");
    }
    for (double l : length_scales) {
        if (!(l > 0.0) || !std::isfinite(l)) {
            throw ContractViolation("kernel length scales must be positive");
        }
    }
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
        throw ContractViolation("kernel signal variance must be positive");
    }
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
        throw ContractViolation("kernel noise variance must be non-negative");
    }
}

double KernelConfig::length_scale(std::size_t dim) const
{
    return length_scales.size() == 1 ? length_scales.front() : length_scales.at(dim);
}

double KernelConfig::covariance(std::span<const double> a, std::span<const double> b) const
{
    double r2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = (a[i] - b[i]) / length_scale(i);
        r2 += d * d;
    }
    switch (kind) {
    case KernelKind::RBF:
        return signal_variance * std::exp(-0.5 * r2);
    case KernelKind::Matern52: {
        const double s = std::sqrt(5.0 * r2);
        return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    }
    return 0.0;
}

GPModel GPModel::fit(std::vector<std::vector<double>> inputs, std::vector<double> targets,
                     KernelConfig kernel)
{
    kernel.validate();
    if (inputs.empty()) {
        throw ContractViolation("GP fit needs at least one point");
    }
    if (inputs.size() != targets.size()) {
        throw ContractViolation("GP fit: inputs and targets differ in length");
    }
    const std::size_t dim = inputs.front().size();
    for (const auto& x : inputs) {
        if (x.size() != dim) {
            throw ContractViolation("GP fit: inputs have mixed dimensionality");
        }
    }
    if (kernel.length_scales.size() != 1 && kernel.length_scales.size() != dim) {
        throw ContractViolation("GP fit: length scale count does not match input dimension");
    }
    for (double y : targets) {
        if (!std::isfinite(y)) {
            throw ContractViolation("GP fit: non-finite target");
        }
    }

    GPModel m;
    m.dim_ = dim;
    m.kernel_ = std::move(kernel);
    m.inputs_ = std::move(inputs);
    m.targets_raw_ = std::move(targets);

    const std::size_t n = m.inputs_.size();
    double mean = 0.0;
    for (double y : m.targets_raw_) mean += y;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double y : m.targets_raw_) var += (y - mean) * (y - mean);
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    if (sd < kMinStd) sd = 1.0;
    m.target_mean_ = mean;
    m.target_std_ = sd;
    m.targets_std_.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.targets_std_[i] = (m.targets_raw_[i] - mean) / sd;

    detail::SquareMatrix gram(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double k = m.kernel_.covariance(m.inputs_[i], m.inputs_[j]);
            gram(i, j) = k;
            gram(j, i) = k;
        }
        gram(i, i) += m.kernel_.noise_variance;
    }

    // First attempt is exact; jitter only enters after a failed factorization.
    for (double jitter = 0.0; jitter <= kMaxJitter * (1.0 + 1e-9); jitter = jitter == 0.0 ? kInitialJitter : jitter * 10.0) {
        detail::SquareMatrix l = gram;
        for (std::size_t i = 0; i < n; ++i) l(i, i) += jitter;
        if (detail::cholesky(l)) {
            m.jitter_ = jitter;
            m.alpha_ = m.targets_std_;
            detail::forward_substitute(l, m.alpha_);
            detail::backward_substitute_transposed(l, m.alpha_);
            m.factor_ = std::move(l.data);
            return m;
        }
    }
    throw NumericalError("GP covariance is not positive definite even with jitter 1e-2");
}

Prediction GPModel::predict(std::span<const double> x) const
{
    if (x.size() != dim_) {
        throw ContractViolation("GP predict: input dimensionality mismatch");
    }
    const std::size_t n = inputs_.size();
    std::vector<double> kx(n);
    for (std::size_t i = 0; i < n; ++i) kx[i] = kernel_.covariance(x, inputs_[i]);

    double mean_std = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_std += kx[i] * alpha_[i];

    // v = L^-1 k_x, latent variance = k(x,x) - v.v
    for (std::size_t i = 0; i < n; ++i) {
        double s = kx[i];
        for (std::size_t k = 0; k < i; ++k) s -= factor_[i * n + k] * kx[k];
        kx[i] = s / factor_[i * n + i];
    }
    double vv = 0.0;
    for (double v : kx) vv += v * v;
    double var_std = kernel_.covariance(x, x) - vv;
    if (var_std < 0.0) var_std = 0.0;

    return {target_mean_ + target_std_ * mean_std, var_std * target_std_ * target_std_};
}

double GPModel::log_marginal_likelihood() const
{
    const std::size_t n = inputs_.size();
    double fit_term = 0.0;
    for (std::size_t i = 0; i < n; ++i) fit_term += targets_std_[i] * alpha_[i];
    double log_det_half = 0.0;
    for (std::size_t i = 0; i < n; ++i) log_det_half += std::log(factor_[i * n + i]);
    return -0.5 * fit_term - log_det_half -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

KernelConfig optimize_hyperparams(const std::vector<std::vector<double>>& inputs,
                                  const std::vector<double>& targets, KernelKind kind)
{
    if (inputs.size() < 2) {
        throw ContractViolation("optimize_hyperparams needs at least two points");
    }
    KernelConfig best;
    best.kind = kind;
    double best_lml = -std::numeric_limits<double>::infinity();
    bool found = false;
    // Ascending grids with >= so ties land on the larger length scale, then noise.
    for (double ls : kLengthScaleGrid) {
        for (double noise : kNoiseVarianceGrid) {
            KernelConfig cfg{kind, {ls}, 1.0, noise};
            try {
                const double lml = GPModel::fit(inputs, targets, cfg).log_marginal_likelihood();
                if (std::isfinite(lml) && lml >= best_lml) {
                    best_lml = lml;
                    best = cfg;
                    found = true;
                }
            } catch (const NumericalError&) {
                // Skip grid points whose covariance cannot be factorized.
            }
        }
    }
    if (!found) {
        throw NumericalError("no hyperparameter grid point produced a valid GP");
    }
    return best;
}

}  // namespace knobtune
