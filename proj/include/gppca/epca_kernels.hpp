#pragma once

// Per-point evaluation of the PCA objective terms. Every point is independent,
// so the batch is a data-parallel loop. Two implementations are kept:
// `evaluate_batch_serial` is the reference, `evaluate_batch_parallel` splits
// points across OpenMP threads. Per-point results are written to fixed slots
// and summed in point order, so both produce bitwise-identical output.

#include <Eigen/Core>

#include "gppca/linalg.hpp"

namespace gppca {

/// Which coordinate system the fitted subspace is flat in.
///   kEFlat: primal = ξ (natural), dual = ζ, potential F = ψ
///   kMFlat: primal = ζ (expectation), dual = ξ, potential F = φ
enum class FlatMode { kEFlat, kMFlat };

struct PointEvaluation {
  bool valid = false;
  double potential = 0.0;  ///< F(x)
  Vector dual;             ///< ∇F(x); empty unless requested
};

/// Evaluates the potential at a flattened primal point. Validity is a strict
/// Cholesky test (no jitter): −2Θ ≻ 0 in e-mode, H − ηηᵀ ≻ 0 in m-mode.
PointEvaluation evaluate_point(FlatMode mode, const Eigen::Ref<const Vector>& x,
                               bool with_dual);

/// Maps a dual point back to primal coordinates (the inverse gradient map).
Vector dual_to_primal(FlatMode mode, const Eigen::Ref<const Vector>& y);

struct BatchEvaluation {
  Vector divergence;          ///< per point: F(x̂ᵢ) + F*(yᵢ) − ⟨x̂ᵢ, yᵢ⟩
  Matrix residual;            ///< D×I, ∇F(x̂ᵢ) − yᵢ; empty unless requested
  Eigen::Index first_invalid = -1;

  bool valid() const { return first_invalid < 0; }
  /// Sum in point order.
  double total() const;
};

/// `recon`, `dual`: D×I column-per-point. `dual_potential`: F*(yᵢ).
BatchEvaluation evaluate_batch_serial(FlatMode mode, const Matrix& recon,
                                      const Matrix& dual, const Vector& dual_potential,
                                      bool with_gradient);

BatchEvaluation evaluate_batch_parallel(FlatMode mode, const Matrix& recon,
                                        const Matrix& dual, const Vector& dual_potential,
                                        bool with_gradient);

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace gppca
