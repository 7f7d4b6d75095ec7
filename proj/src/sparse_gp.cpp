#include "gppca/sparse_gp.hpp"

#include <stdexcept>

#include "gppca/error.hpp"

namespace gppca {

void validate(const InducingSet& z) {
  if (z.size() < 1) throw std::invalid_argument("inducing set is empty");
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    for (Eigen::Index j = i + 1; j < z.size(); ++j) {
      if ((z.points.row(i) - z.points.row(j)).cwiseAbs().maxCoeff() <= 1e-12) {
        throw std::invalid_argument("inducing points " + std::to_string(i) + " and " +
                                    std::to_string(j) + " coincide");
      }
    }
  }
}

InducingSet grid_inducing(const InputSet& observed, Eigen::Index m) {
  if (observed.cols() != 1) {
    throw std::invalid_argument("grid inducing points require 1-D inputs");
  }
  if (m < 1 || observed.rows() == 0) {
    throw std::invalid_argument("grid inducing points need m >= 1 and observed inputs");
  }
  const double lo = observed.col(0).minCoeff();
  const double hi = observed.col(0).maxCoeff();
  InducingSet z{InputSet(m, 1)};
  if (m == 1) {
    z.points(0, 0) = 0.5 * (lo + hi);
  } else {
    z.points.col(0) = Vector::LinSpaced(m, lo, hi);
  }
  return z;
}

SparsePosterior variational_posterior(const GpPrior& prior, const TaskData& task,
                                      const InducingSet& z) {
  validate(prior);
  validate(task);
  validate(z);
  const Matrix k_mm = gram(prior.kernel, z.points, z.points);
  const auto k_llt = cholesky_with_jitter(k_mm, "K_mm");
  const Vector prior_part = k_llt.solve(prior.mean(z.points));
  const double noise = 1.0 / prior.beta;

  if (task.size() == 0) {
    // A = β⁻¹K_mm, so Σ' = β⁻¹A⁻¹ = K_mm⁻¹.
    return {prior_part, inverse_from(k_llt)};
  }

  const Matrix k_mn = gram(prior.kernel, z.points, task.inputs);
  const Matrix a = symmetrize(noise * k_mm + k_mn * k_mn.transpose());
  const auto a_llt = cholesky_with_jitter(a, "A_mm");
  const Vector resid = task.outputs - prior.mean(task.inputs);

  SparsePosterior sp;
  sp.mu_prime = a_llt.solve(k_mn * resid) + prior_part;
  sp.sigma_prime = noise * inverse_from(a_llt);
  return sp;
}

PredictionBatch sparse_predictive(const GpPrior& prior, const SparsePosterior& sp,
                                  const InducingSet& z, const InputSet& x_plus) {
  if (sp.mu_prime.size() != z.size()) {
    throw std::invalid_argument("sparse_predictive: posterior size differs from inducing set");
  }
  const Matrix k_mm = gram(prior.kernel, z.points, z.points);
  const auto k_llt = cholesky_with_jitter(k_mm, "K_mm");
  const Vector centered = sp.mu_prime - k_llt.solve(prior.mean(z.points));
  const Matrix k_mp = gram(prior.kernel, z.points, x_plus);
  const Matrix solved = k_llt.solve(k_mp);
  const Matrix sk = sp.sigma_prime * k_mp;

  PredictionBatch out{Vector(x_plus.rows()), Vector(x_plus.rows())};
  for (Eigen::Index j = 0; j < x_plus.rows(); ++j) {
    const Vector xj = x_plus.row(j).transpose();
    out.mean(j) = prior.mean_at(xj) + k_mp.col(j).dot(centered);
    const double v = kernel_eval(prior.kernel, xj, xj) - k_mp.col(j).dot(solved.col(j)) +
                     k_mp.col(j).dot(sk.col(j));
    out.variance(j) = clamp_variance(v);
  }
  return out;
}

Prediction sparse_predictive(const GpPrior& prior, const SparsePosterior& sp,
                             const InducingSet& z, const Eigen::Ref<const Vector>& x_plus) {
  const InputSet x = x_plus.transpose();
  const auto batch = sparse_predictive(prior, sp, z, x);
  return {batch.mean(0), batch.variance(0)};
}

MomentGaussian rho_prime_to_rho(const SparsePosterior& sp, const InducingSet& z,
                                const KernelConfig& cfg) {
  const Matrix k_mm = gram(cfg, z.points, z.points);
  return {k_mm * sp.mu_prime, symmetrize(k_mm * sp.sigma_prime * k_mm)};
}

SparsePosterior rho_to_rho_prime(const MomentGaussian& rho, const InducingSet& z,
                                 const KernelConfig& cfg) {
  const Matrix k_mm = gram(cfg, z.points, z.points);
  const auto llt = cholesky_with_jitter(k_mm, "K_mm");
  const Matrix left = llt.solve(rho.sigma);                       // K⁻¹Σ
  const Matrix both = llt.solve(left.transpose()).transpose();    // K⁻¹ΣK⁻¹
  return {llt.solve(rho.mu), symmetrize(both)};
}

}  // namespace gppca
