#pragma once

#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace gppca {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Returns ½(A + Aᵀ).
Matrix symmetrize(const Eigen::Ref<const Matrix>& a);

/// Cholesky factorization with the bounded jitter policy: on failure, add
/// 1e-10·trace/d to the diagonal and escalate by ×10 up to 1e-6·trace/d.
/// Throws DecompositionError naming `what` when every attempt fails.
Eigen::LLT<Matrix> cholesky_with_jitter(const Eigen::Ref<const Matrix>& a,
                                        std::string_view what);

/// Plain Cholesky with no jitter; returns false when `a` is not (numerically)
/// positive definite. Used for cone-membership tests.
bool try_cholesky(const Eigen::Ref<const Matrix>& a, Eigen::LLT<Matrix>& out);

/// log|A| from a Cholesky factor.
double log_det(const Eigen::LLT<Matrix>& llt);

/// A⁻¹ from a Cholesky factor (symmetrized).
Matrix inverse_from(const Eigen::LLT<Matrix>& llt);

/// Largest absolute entry, 0 for empty.
double max_abs(const Eigen::Ref<const Matrix>& a);

}  // namespace gppca
