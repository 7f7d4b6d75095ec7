#pragma once

// Variational sparse GP posterior (Titsias) in the reparameterized chart
//   μ' = K_mm⁻¹μ,   Σ' = K_mm⁻¹ Σ K_mm⁻¹
// where (μ, Σ) is the variational Gaussian over f(X_m).
//
// Orientation: K_mn = k(X_m, X_i) is m×N_i, so A_mm = β⁻¹K_mm + K_mn K_mnᵀ is m×m.

#include "gppca/geometry.hpp"
#include "gppca/kernels.hpp"

namespace gppca {

struct InducingSet {
  InputSet points;

  Eigen::Index size() const { return points.rows(); }
};

struct SparsePosterior {
  Vector mu_prime;
  Matrix sigma_prime;
};

/// Throws std::invalid_argument when empty or two points coincide within 1e-12.
void validate(const InducingSet& z);

/// m points on a uniform grid spanning [min, max] of the observed 1-D inputs.
InducingSet grid_inducing(const InputSet& observed, Eigen::Index m);

/// μ' = A⁻¹K_mn(y − μ₀) + K_mm⁻¹μ_m0,  Σ' = β⁻¹A⁻¹.
SparsePosterior variational_posterior(const GpPrior& prior, const TaskData& task,
                                      const InducingSet& z);

/// mean = μ₀(x) + k_mᵀ(μ' − K_mm⁻¹μ_m0),
/// var  = k(x,x) − k_mᵀK_mm⁻¹k_m + k_mᵀΣ'k_m.
Prediction sparse_predictive(const GpPrior& prior, const SparsePosterior& sp,
                             const InducingSet& z, const Eigen::Ref<const Vector>& x_plus);

PredictionBatch sparse_predictive(const GpPrior& prior, const SparsePosterior& sp,
                                  const InducingSet& z, const InputSet& x_plus);

/// (μ, Σ) = (K_mm μ', K_mm Σ' K_mm).
MomentGaussian rho_prime_to_rho(const SparsePosterior& sp, const InducingSet& z,
                                const KernelConfig& cfg);

/// (μ', Σ') = (K_mm⁻¹μ, K_mm⁻¹ Σ K_mm⁻¹).
SparsePosterior rho_to_rho_prime(const MomentGaussian& rho, const InducingSet& z,
                                 const KernelConfig& cfg);

}  // namespace gppca
