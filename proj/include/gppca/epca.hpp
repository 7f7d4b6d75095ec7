#pragma once

// PCA over Gaussians: fit an affine subspace x̂(w) = u₀ + Σ w_l u_l in the
// primal coordinates of a FlatMode, minimizing Σᵢ D_F(x̂ᵢ, yᵢ) where the
// Bregman divergence D_F equals KL between the data point and its
// reconstruction. e-flat mode is e-PCA (E = Σᵢ KL[pᵢ ‖ p̂ᵢ]); m-flat mode is
// the dual m-PCA (E = Σᵢ KL[p̂ᵢ ‖ pᵢ]).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gppca/epca_kernels.hpp"
#include "gppca/geometry.hpp"

namespace gppca {

/// Data points in both coordinate systems, one column per point.
struct CoordinateSet {
  FlatMode mode = FlatMode::kEFlat;
  Matrix primal;          ///< D×I, coordinates the subspace is flat in
  Matrix dual;            ///< D×I, ∇F(primal)
  Vector dual_potential;  ///< F*(dual) per point

  Eigen::Index points() const { return primal.cols(); }
  Eigen::Index length() const { return primal.rows(); }
};

CoordinateSet make_coordinate_set(std::span<const MomentGaussian> gaussians, FlatMode mode);

/// Builds the set from primal coordinates directly (validity checked).
CoordinateSet coordinate_set_from_primal(const Matrix& primal, FlatMode mode);

struct Subspace {
  Vector offset;  ///< u₀
  Matrix basis;   ///< D×L, column l is u_l
  FlatMode mode = FlatMode::kEFlat;

  Eigen::Index latent_dim() const { return basis.cols(); }
};

/// I×L, row i is wᵢ.
using WeightMatrix = Matrix;

/// kLbfgs: joint quasi-Newton over (W, u₀, U).
/// kAlternating: a gradient step on W, then one on (u₀, U), repeated.
enum class FitMethod { kLbfgs, kAlternating };

std::string to_string(FitMethod method);
/// "lbfgs" or "alternating"; throws std::invalid_argument otherwise.
FitMethod parse_fit_method(const std::string& s);

struct FitOptions {
  FitMethod method = FitMethod::kLbfgs;
  double learning_rate = 1e-3;
  int max_iters = 10000;
  double rel_tol = 1e-8;
  std::uint64_t seed = 0;
  double backtrack_factor = 0.5;
  int max_backtracks = 40;
  bool parallel = true;
};

void validate(const FitOptions& opts);

Vector reconstruct(const Eigen::Ref<const Vector>& w, const Subspace& s);

/// D×I matrix of reconstructions, column i from row i of `w`.
Matrix reconstruct_all(const WeightMatrix& w, const Subspace& s);

/// Σᵢ divergence(pointᵢ, reconstructionᵢ). Throws ValidityError carrying the
/// first invalid point index.
double objective(const WeightMatrix& w, const Subspace& s, const CoordinateSet& data);

struct Gradients {
  Matrix weights;  ///< I×L: ⟨u_l, rᵢ⟩ with rᵢ = ∇F(x̂ᵢ) − yᵢ
  Vector offset;   ///< Σᵢ rᵢ
  Matrix basis;    ///< D×L: Σᵢ w_il rᵢ
};

Gradients gradients(const WeightMatrix& w, const Subspace& s, const CoordinateSet& data);

struct ProjectionResult {
  Vector weights;
  double objective = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// m-projection of point `index` of `data` onto `s` by descent on w alone,
/// started from `start` (zeros when empty). Throws ConvergenceError if the
/// gradient is still above rel_tol·‖yᵢ‖ after max_iters.
ProjectionResult project_point(const CoordinateSet& data, Eigen::Index index,
                               const Subspace& s, const FitOptions& opts,
                               const Vector& start = Vector());

struct FitResult {
  Subspace subspace;
  WeightMatrix weights;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  ///< objective after each accepted iteration
};

/// Minimizes the summed divergence. Starts from u₀ at the dual mean and the
/// top principal directions of the primal coordinates as a unit basis, with W
/// at the projections (kLbfgs) or zero (kAlternating). Afterwards every point
/// is projected onto the final subspace and the basis normalized to unit
/// length. Every accepted step decreases the objective. Throws
/// std::invalid_argument unless 0 ≤ L ≤ I−1, and ValidityError when no valid
/// step exists even at the smallest step size.
FitResult fit(const CoordinateSet& data, Eigen::Index latent_dim, const FitOptions& opts);

/// Keeps the matrix block of a flattened coordinate symmetric.
void symmetrize_coordinates(Eigen::Ref<Vector> x);

}  // namespace gppca
