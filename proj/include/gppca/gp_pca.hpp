#pragma once

// PCA over GP posteriors. Every task posterior is a Gaussian over the values
// of f at a shared anchor set (the union of task inputs, or inducing points),
// so e-PCA applies to them directly; predictions at new inputs follow from
// composing with the prior conditional p(f₊ | f_anchor), which is affine in
// the natural coordinates and preserves KL.
//
// Charts. A task posterior can be represented in different but KL-equivalent
// coordinates over the anchor values:
//   kDirect    exact mode: ρ = (μ, Σ) over f(X);  sparse mode: ρ' = (K⁻¹μ, K⁻¹ΣK⁻¹)
//   kWhitened  v = L⁻¹f with K = LLᵀ; precision P = I + βΦᵀΦ, Φ = k(Xᵢ, Z)L⁻ᵀ
// Any invertible affine change of f maps e-flat sets to e-flat sets and keeps
// KL, so both charts have the same optimum. The whitened one keeps P ⪰ I,
// which matters because K over dense inputs is close to singular.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gppca/epca.hpp"
#include "gppca/kernels.hpp"
#include "gppca/sparse_gp.hpp"

namespace gppca {

enum class PosteriorMode { kExact, kSparse };
enum class Chart { kDirect, kWhitened };

/// Posterior construction and prediction for one (prior, anchor, mode, chart).
class ChartMap {
 public:
  ChartMap() = default;
  ChartMap(const GpPrior& prior, const InputSet& anchor, PosteriorMode mode, Chart chart);

  /// Task posterior over the anchor values, expressed in this chart.
  MomentGaussian posterior(const TaskData& task) const;

  /// Predictive at x₊ from a Gaussian expressed in this chart.
  PredictionBatch predict(const MomentGaussian& g, const InputSet& x_plus) const;

  /// Gaussian over f(anchor) for a Gaussian in this chart.
  MomentGaussian to_function_space(const MomentGaussian& g) const;

  const InputSet& anchor() const { return anchor_; }

 private:
  GpPrior prior_;
  InputSet anchor_;
  PosteriorMode mode_ = PosteriorMode::kExact;
  Chart chart_ = Chart::kWhitened;
  Matrix factor_;        // lower Cholesky factor of K(anchor, anchor) (with jitter if needed)
  Vector prior_white_;   // L⁻¹μ₀(anchor)
};

struct GpPcaModel {
  GpPrior prior;
  PosteriorMode mode = PosteriorMode::kExact;
  Chart chart = Chart::kWhitened;
  InputSet anchor;
  Subspace subspace;
  WeightMatrix weights;
  std::vector<int> task_ids;
  FitOptions fit_options;
  double objective = 0.0;
  int iterations = 0;
  ChartMap map;  ///< rebuilt from the fields above; not persisted

  Eigen::Index latent_dim() const { return subspace.latent_dim(); }
  Eigen::Index num_tasks() const { return weights.rows(); }
};

struct TrainOptions {
  PosteriorMode mode = PosteriorMode::kExact;
  Chart chart = Chart::kWhitened;
  FitOptions fit;
};

/// Per-task posteriors (computed in parallel) then the subspace fit.
/// Requires I ≥ 2 and 0 ≤ L ≤ I−1; sparse mode requires `inducing`.
GpPcaModel train(std::span<const TaskData> tasks, const GpPrior& prior, Eigen::Index latent_dim,
                 const TrainOptions& opts, const std::optional<InducingSet>& inducing = {});

/// Natural coordinates of every task posterior, in the model's chart.
CoordinateSet task_coordinates(std::span<const TaskData> tasks, const ChartMap& map,
                               bool parallel = true);

/// Rebuilds `model.map` after the other fields were filled in (e.g. on load).
void rebuild_chart(GpPcaModel& model);

/// Reconstructed Gaussian in the model's chart; throws ValidityError when Θ̂
/// is not negative definite.
MomentGaussian reconstructed_gaussian(const GpPcaModel& model, const Eigen::Ref<const Vector>& w);

PredictionBatch predict(const GpPcaModel& model, const Eigen::Ref<const Vector>& w,
                        const InputSet& x_plus);
PredictionBatch predict_task(const GpPcaModel& model, Eigen::Index task_index,
                             const InputSet& x_plus);

/// Weight vector of a new task: its posterior over the anchor set, projected
/// onto the subspace. Requires a nonempty task.
ProjectionResult adapt_new_task(const GpPcaModel& model, const TaskData& fewshot,
                                const FitOptions& opts);

/// q(f₊, f | ρ) = p(f₊ | f) q(f | ρ) over X∗ = X then X₊:
///   μ∗ = μ∗₀ + K∗K⁻¹(μ − μ₀),   Σ∗∗ = K∗∗ + K∗K⁻¹(Σ − K)K⁻¹K∗ᵀ,  K∗ = k(X∗, X).
MomentGaussian joint_posterior_moments(const GpPrior& prior, const MomentGaussian& rho,
                                       const InputSet& anchor, const InputSet& x_plus);
NaturalCoord joint_posterior_coords(const GpPrior& prior, const MomentGaussian& rho,
                                    const InputSet& anchor, const InputSet& x_plus);

std::string to_string(PosteriorMode mode);
std::string to_string(Chart chart);
PosteriorMode parse_posterior_mode(const std::string& s);
Chart parse_chart(const std::string& s);

}  // namespace gppca
