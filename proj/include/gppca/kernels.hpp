#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gppca/geometry.hpp"
#include "gppca/linalg.hpp"

namespace gppca {

/// One input point per row.
using InputSet = Eigen::MatrixXd;

enum class KernelKind { kRbf };

struct KernelConfig {
  KernelKind kind = KernelKind::kRbf;
  double lengthscale = 1.0;
};

struct TaskData {
  InputSet inputs;
  Vector outputs;
  int task_id = 0;

  Eigen::Index size() const { return outputs.size(); }
};

/// Shared GP prior: constant mean, kernel, and noise precision β.
struct GpPrior {
  KernelConfig kernel;
  double beta = 1.0;
  double mean_constant = 0.0;

  double mean_at(const Eigen::Ref<const Vector>& /*x*/) const { return mean_constant; }
  Vector mean(const InputSet& xs) const {
    return Vector::Constant(xs.rows(), mean_constant);
  }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct PredictionBatch {
  Vector mean;
  Vector variance;
};

void validate(const KernelConfig& cfg);
void validate(const GpPrior& prior);
void validate(const TaskData& task);

/// k(x, x') = exp(−|x − x'|² / 2l²).
double kernel_eval(const KernelConfig& cfg, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x2);

Matrix gram(const KernelConfig& cfg, const InputSet& a, const InputSet& b);

/// Deduplicated concatenation of all task inputs in task order. Points whose
/// coordinates all agree within `tol` are merged.
InputSet union_inputs(std::span<const TaskData> tasks, double tol = 1e-12);

/// Posterior over f(anchor) given one task:
///   μ = μ₀ + K_a,i (K_ii + β⁻¹I)⁻¹ (y − μ₀,i)
///   Σ = K − K_a,i (K_ii + β⁻¹I)⁻¹ K_a,iᵀ
MomentGaussian exact_posterior(const GpPrior& prior, const TaskData& task,
                               const InputSet& anchor);

/// Predictive at x₊ from a Gaussian over f(anchor), composed with the prior
/// conditional p(f₊ | f). Mean uses the centered form μ₀ + kᵀK⁻¹(μ − μ₀).
Prediction predictive(const GpPrior& prior, const MomentGaussian& rho,
                      const InputSet& anchor, const Eigen::Ref<const Vector>& x_plus);

PredictionBatch predictive(const GpPrior& prior, const MomentGaussian& rho,
                           const InputSet& anchor, const InputSet& x_plus);

/// Plain GP regression predictive from the closed form
///   μ(x) = μ₀ + kᵀ(K + β⁻¹I)⁻¹(y − μ₀),  σ(x) = k(x,x) − kᵀ(K + β⁻¹I)⁻¹k.
/// This is the baseline the experiments compare against.
PredictionBatch gp_regression(const GpPrior& prior, const TaskData& task,
                              const InputSet& x_plus);

/// Clamps a computed variance at 0; values below −1e-10 are reported on stderr.
double clamp_variance(double v);

}  // namespace gppca
