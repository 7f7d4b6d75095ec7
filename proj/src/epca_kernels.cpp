#include "gppca/epca_kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gppca/geometry.hpp"

namespace gppca {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

PointEvaluation evaluate_natural(const Eigen::Ref<const Vector>& x, Eigen::Index d,
                                 bool with_dual) {
  PointEvaluation out;
  const Eigen::Ref<const Vector> theta = x.head(d);
  const Matrix precision = -symmetrize(x.tail(d * d).reshaped(d, d));
  Eigen::LLT<Matrix> llt;
  if (!try_cholesky(2.0 * precision, llt)) return out;

  const Vector mu = llt.solve(theta);
  out.valid = std::isfinite(mu.sum());
  if (!out.valid) return out;
  out.potential = 0.5 * theta.dot(mu) - 0.5 * log_det(llt) +
                  0.5 * static_cast<double>(d) * kLog2Pi;
  if (with_dual) {
    out.dual.resize(coordinate_length(d));
    out.dual.head(d) = mu;
    Matrix h = inverse_from(llt) + mu * mu.transpose();
    out.dual.tail(d * d) = h.reshaped();
  }
  return out;
}

PointEvaluation evaluate_expectation(const Eigen::Ref<const Vector>& x, Eigen::Index d,
                                     bool with_dual) {
  PointEvaluation out;
  const Eigen::Ref<const Vector> eta = x.head(d);
  const Matrix sigma = symmetrize(x.tail(d * d).reshaped(d, d)) - eta * eta.transpose();
  Eigen::LLT<Matrix> llt;
  if (!try_cholesky(sigma, llt)) return out;

  out.valid = true;
  out.potential = -0.5 * log_det(llt) - 0.5 * static_cast<double>(d) * (1.0 + kLog2Pi);
  if (with_dual) {
    const Matrix precision = inverse_from(llt);
    out.dual.resize(coordinate_length(d));
    out.dual.head(d) = precision * eta;
    out.dual.tail(d * d) = (-0.5 * precision).reshaped();
  }
  return out;
}

void evaluate_one(FlatMode mode, const Matrix& recon, const Matrix& dual,
                  const Vector& dual_potential, bool with_gradient, Eigen::Index i,
                  BatchEvaluation& out, std::vector<char>& invalid) {
  const auto x = recon.col(i);
  const PointEvaluation e = evaluate_point(mode, x, with_gradient);
  if (!e.valid) {
    invalid[static_cast<std::size_t>(i)] = 1;
    out.divergence(i) = std::numeric_limits<double>::infinity();
    return;
  }
  out.divergence(i) = e.potential + dual_potential(i) - x.dot(dual.col(i));
  if (with_gradient) out.residual.col(i) = e.dual - dual.col(i);
}

BatchEvaluation prepare(const Matrix& recon, bool with_gradient) {
  BatchEvaluation out;
  out.divergence.resize(recon.cols());
  if (with_gradient) out.residual.resize(recon.rows(), recon.cols());
  return out;
}

void finish(BatchEvaluation& out, const std::vector<char>& invalid) {
  for (std::size_t i = 0; i < invalid.size(); ++i) {
    if (invalid[i]) {
      out.first_invalid = static_cast<Eigen::Index>(i);
      return;
    }
  }
}

}  // namespace

PointEvaluation evaluate_point(FlatMode mode, const Eigen::Ref<const Vector>& x,
                               bool with_dual) {
  const Eigen::Index d = gaussian_dim(x.size());
  return mode == FlatMode::kEFlat ? evaluate_natural(x, d, with_dual)
                                  : evaluate_expectation(x, d, with_dual);
}

Vector dual_to_primal(FlatMode mode, const Eigen::Ref<const Vector>& y) {
  // The dual of an e-flat fit is an expectation point, and vice versa.
  if (mode == FlatMode::kEFlat) {
    return flatten(expectation_to_natural(unflatten_expectation(y)));
  }
  return flatten(natural_to_expectation(unflatten_natural(y)));
}

double BatchEvaluation::total() const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < divergence.size(); ++i) sum += divergence(i);
  return sum;
}

BatchEvaluation evaluate_batch_serial(FlatMode mode, const Matrix& recon,
                                      const Matrix& dual, const Vector& dual_potential,
                                      bool with_gradient) {
  gaussian_dim(recon.rows());  // validates the layout
  BatchEvaluation out = prepare(recon, with_gradient);
  std::vector<char> invalid(static_cast<std::size_t>(recon.cols()), 0);
  for (Eigen::Index i = 0; i < recon.cols(); ++i) {
    evaluate_one(mode, recon, dual, dual_potential, with_gradient, i, out, invalid);
  }
  finish(out, invalid);
  return out;
}

BatchEvaluation evaluate_batch_parallel(FlatMode mode, const Matrix& recon,
                                        const Matrix& dual, const Vector& dual_potential,
                                        bool with_gradient) {
  gaussian_dim(recon.rows());  // validates the layout
  BatchEvaluation out = prepare(recon, with_gradient);
  std::vector<char> invalid(static_cast<std::size_t>(recon.cols()), 0);
  const Eigen::Index n = recon.cols();
#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index i = 0; i < n; ++i) {
    evaluate_one(mode, recon, dual, dual_potential, with_gradient, i, out, invalid);
  }
  finish(out, invalid);
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace gppca
