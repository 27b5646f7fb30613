#pragma once

#include <span>
#include <vector>

namespace knobtune {

enum class KernelKind { Matern52, RBF };

/// Stationary kernel hyperparameters. Length scales are in unit-cube units;
/// variances are in standardized-target units. A single length scale is
/// broadcast to every input dimension.
struct KernelConfig {
    KernelKind kind = KernelKind::Matern52;
    std::vector<double> length_scales{0.2};
    double signal_variance = 1.0;
    double noise_variance = 1e-4;

    /// Throws ContractViolation on non-positive scales/variances.
    void validate() const;
    double length_scale(std::size_t dim) const;
    /// k(a, b) without the noise term.
    double covariance(std::span<const double> a, std::span<const double> b) const;

    bool operator==(const KernelConfig&) const = default;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Gaussian-process posterior over a fixed training set.
///
/// Targets are standardized to zero mean / unit variance before fitting and
/// predictions are mapped back to raw units. The returned variance is the
/// variance of the latent function (observation noise excluded).
class GPModel {
public:
    /// Throws ContractViolation on empty/mismatched/non-finite inputs and
    /// NumericalError when (K + noise I + jitter I) cannot be factorized with
    /// jitter up to 1e-2.
    static GPModel fit(std::vector<std::vector<double>> inputs, std::vector<double> targets,
                       KernelConfig kernel);

    Prediction predict(std::span<const double> x) const;

    /// log p(standardized targets | inputs, kernel).
    double log_marginal_likelihood() const;

    const KernelConfig& kernel() const { return kernel_; }
    const std::vector<std::vector<double>>& inputs() const { return inputs_; }
    const std::vector<double>& targets() const { return targets_raw_; }
    std::size_t input_dimension() const { return dim_; }
    std::size_t size() const { return inputs_.size(); }
    double target_mean() const { return target_mean_; }
    double target_std() const { return target_std_; }
    /// Diagonal jitter that made the covariance factorizable.
    double jitter() const { return jitter_; }

private:
    GPModel() = default;

    std::vector<std::vector<double>> inputs_;
    std::vector<double> targets_raw_;
    std::vector<double> targets_std_;
    double target_mean_ = 0.0;
    double target_std_ = 1.0;
    KernelConfig kernel_;
    std::size_t dim_ = 0;
    std::vector<double> factor_;  // row-major lower Cholesky factor, n x n
    std::vector<double> alpha_;
    double jitter_ = 0.0;
};

/// Grid of isotropic length scales searched by optimize_hyperparams.
inline constexpr double kLengthScaleGrid[] = {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 2.0};
/// Grid of noise variances searched by optimize_hyperparams.
inline constexpr double kNoiseVarianceGrid[] = {1e-6, 1e-4, 1e-2, 1e-1};

/// Maximizes the log marginal likelihood over the length-scale x noise grid,
/// with signal variance fixed at 1. Ties go to the larger length scale, then
/// the larger noise. Requires at least two points.
KernelConfig optimize_hyperparams(const std::vector<std::vector<double>>& inputs,
                                  const std::vector<double>& targets, KernelKind kind);

}  // namespace knobtune
