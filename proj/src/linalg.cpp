#include "gppca/linalg.hpp"

#include <cmath>
#include <string>

#include "gppca/error.hpp"

namespace gppca {

Matrix symmetrize(const Eigen::Ref<const Matrix>& a) {
  return 0.5 * (a + a.transpose());
}

bool try_cholesky(const Eigen::Ref<const Matrix>& a, Eigen::LLT<Matrix>& out) {
  if (a.rows() != a.cols()) return false;
  if (!a.allFinite()) return false;
  out.compute(a);
  if (out.info() != Eigen::Success) return false;
  // LLT only checks pivots > 0; reject factors that underflowed to 0.
  return (out.matrixLLT().diagonal().array() > 0.0).all();
}

Eigen::LLT<Matrix> cholesky_with_jitter(const Eigen::Ref<const Matrix>& a,
                                        std::string_view what) {
  Eigen::LLT<Matrix> llt;
  if (try_cholesky(a, llt)) return llt;

  const auto d = static_cast<double>(a.rows());
  const double scale = d > 0 ? std::abs(a.trace()) / d : 0.0;
  if (scale > 0.0 && std::isfinite(scale)) {
    for (double rel = 1e-10; rel <= 1e-6 * (1 + 1e-9); rel *= 10.0) {
      Matrix jittered = a;
      jittered.diagonal().array() += rel * scale;
      if (try_cholesky(jittered, llt)) return llt;
    }
  }
  throw DecompositionError("Cholesky factorization of " + std::string(what) +
                           " failed after jitter escalation");
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix inverse_from(const Eigen::LLT<Matrix>& llt) {
  const auto n = llt.matrixLLT().rows();
  return symmetrize(llt.solve(Matrix::Identity(n, n)));
}

double max_abs(const Eigen::Ref<const Matrix>& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

}  // namespace gppca
