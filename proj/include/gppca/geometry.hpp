#pragma once

// Dual-coordinate algebra for finite-dimensional Gaussians.
//
// Three parameterizations of N(μ, Σ) are used throughout:
//   moment       (μ, Σ)
//   natural  ξ = (θ, Θ) = (Σ⁻¹μ, −½Σ⁻¹)          e-coordinates
//   expectation ζ = (η, H) = (μ, μμᵀ + Σ)         m-coordinates
// The pairing is ⟨ξ, ζ⟩ = θᵀη + tr(ΘᵀH), which is the Euclidean inner product
// of the flattened vectors [θ; vec Θ] and [η; vec H].

#include <Eigen/Core>

#include "gppca/linalg.hpp"

namespace gppca {

struct MomentGaussian {
  Vector mu;
  Matrix sigma;

  Eigen::Index dim() const { return mu.size(); }
};

struct NaturalCoord {
  Vector theta;
  Matrix big_theta;

  Eigen::Index dim() const { return theta.size(); }
};

struct ExpectationCoord {
  Vector eta;
  Matrix big_h;

  Eigen::Index dim() const { return eta.size(); }
};

/// Throws std::invalid_argument on shape errors or an asymmetric Σ.
void validate(const MomentGaussian& g);

NaturalCoord moment_to_natural(const MomentGaussian& g);
MomentGaussian natural_to_moment(const NaturalCoord& c);
ExpectationCoord moment_to_expectation(const MomentGaussian& g);
MomentGaussian expectation_to_moment(const ExpectationCoord& c);

/// Direct formulas η = −½Θ⁻¹θ, H = ¼Θ⁻¹θθᵀΘ⁻¹ − ½Θ⁻¹.
ExpectationCoord natural_to_expectation(const NaturalCoord& c);
/// Direct formulas θ = (H − ηηᵀ)⁻¹η, Θ = −½(H − ηηᵀ)⁻¹.
NaturalCoord expectation_to_natural(const ExpectationCoord& c);

/// ψ(ξ) = ½θᵀΣθ + ½ln|Σ| + (d/2)ln 2π with Σ = (−2Θ)⁻¹. Only the symmetric
/// part of Θ enters, so ∂ψ/∂Θ = H for entrywise perturbations.
double log_partition(const NaturalCoord& c);

/// φ(ζ) = −½ln|H − ηηᵀ| − (d/2)(1 + ln 2π), the negative entropy.
double dual_potential(const ExpectationCoord& c);

double inner_product(const NaturalCoord& xi, const ExpectationCoord& zeta);

/// KL[p‖q] = ∫p ln(p/q) = ψ(ξ_q) + φ(ζ_p) − ⟨ξ_q, ζ_p⟩.
double kl_divergence(const MomentGaussian& p, const MomentGaussian& q);

// Flattened coordinates: [v; vec(M)] with column-major vec, length d + d².

Eigen::Index coordinate_length(Eigen::Index d);
/// Inverse of coordinate_length; throws std::invalid_argument if not of that form.
Eigen::Index gaussian_dim(Eigen::Index coordinate_length);

Vector flatten(const NaturalCoord& c);
Vector flatten(const ExpectationCoord& c);
NaturalCoord unflatten_natural(const Eigen::Ref<const Vector>& v);
ExpectationCoord unflatten_expectation(const Eigen::Ref<const Vector>& v);

}  // namespace gppca
