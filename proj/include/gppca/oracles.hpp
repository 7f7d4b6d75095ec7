#pragma once

// Brute-force reference computations used by the test suites. Everything here
// is deliberately written along a different numerical path from the library
// (LU instead of Cholesky, dense block composition instead of affine maps) so
// agreement means something.

#include <random>
#include <span>

#include "gppca/epca.hpp"
#include "gppca/geometry.hpp"
#include "gppca/kernels.hpp"

namespace gppca::oracle {

/// ½[tr(Σq⁻¹Σp) + (μq−μp)ᵀΣq⁻¹(μq−μp) − d + ln|Σq| − ln|Σp|].
double gaussian_kl(const MomentGaussian& p, const MomentGaussian& q);

/// 2-norm condition number via the symmetric eigendecomposition.
double condition_number(const Matrix& spd);

/// Random SPD matrix, redrawn until its condition number is at most `max_condition`.
Matrix random_spd(Eigen::Index d, std::mt19937_64& rng, double max_condition = 1e4);

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

MomentGaussian random_gaussian(Eigen::Index d, std::mt19937_64& rng,
                               double max_condition = 1e4);

/// max |(A+UBV)⁻¹ − (A⁻¹ − A⁻¹U(B⁻¹+VA⁻¹U)⁻¹VA⁻¹)|. Throws std::invalid_argument
/// when A or B is singular.
double check_woodbury(const Matrix& a, const Matrix& u, const Matrix& b, const Matrix& v);

/// max |(K+KBK)⁻¹ − (K⁻¹ − (B⁻¹+K)⁻¹)|.
double check_woodbury_derived(const Matrix& k, const Matrix& b);

/// max |Σ₊Σ⁻¹ − K₊K⁻¹| with Σ₊ = K₊ + K₊VK, Σ = K + KVK.
double check_sigma_ratio(const Matrix& k_plus, const Matrix& k, const Matrix& v);

/// max |Θ∗∗K∗K⁻¹Θ⁻¹ − K∗∗⁻¹K∗| with Θ∗∗ = (K∗∗ + K∗VK∗ᵀ)⁻¹, Θ = (K + KVK)⁻¹.
/// K must be the leading block of K∗∗ and K∗ its leading columns.
double check_theta_transport(const Matrix& k, const Matrix& v, const Matrix& k_star,
                             const Matrix& k_starstar);

/// Joint Gaussian over f(X ∪ X₊) = f(X) stacked on f(X₊), composed directly as
/// p(f₊ | f) q(f | ρ) with block formulas.
MomentGaussian compose_joint(const GpPrior& prior, const MomentGaussian& rho,
                             const InputSet& x, const InputSet& x_plus);

/// |KL(joint(ρ) ‖ joint(ρ₂)) − KL(ρ ‖ ρ₂)| with both KLs in closed form.
double kl_decomposition_check(const GpPrior& prior, const MomentGaussian& rho,
                              const MomentGaussian& rho2, const InputSet& x,
                              const InputSet& x_plus);

/// e-PCA run directly on the joint coordinates over X ∪ X₊, where X is the
/// union of the task inputs. Returns the final objective.
double fit_joint_direct(std::span<const TaskData> tasks, const GpPrior& prior,
                        const InputSet& x_plus, Eigen::Index latent_dim,
                        const FitOptions& opts);

/// Minimum of the single-point divergence over a grid of weight vectors
/// (L ≤ 2) with spacing `step` inside [lo, hi]^L. Returns the best w.
Vector grid_search_projection(const CoordinateSet& data, Eigen::Index index,
                              const Subspace& s, double lo, double hi, double step);

}  // namespace gppca::oracle
