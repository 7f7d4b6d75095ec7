#include "gppca/kernels.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "gppca/error.hpp"

namespace gppca {

void validate(const KernelConfig& cfg) {
  if (!(cfg.lengthscale > 0.0) || !std::isfinite(cfg.lengthscale)) {
    throw std::invalid_argument("kernel lengthscale must be positive");
  }
}

void validate(const GpPrior& prior) {
  validate(prior.kernel);
  if (!(prior.beta > 0.0) || !std::isfinite(prior.beta)) {
    throw std::invalid_argument("beta must be positive");
  }
}

void validate(const TaskData& task) {
  if (task.inputs.rows() != task.outputs.size()) {
    throw std::invalid_argument("task " + std::to_string(task.task_id) +
                                ": inputs and outputs differ in length");
  }
}

double kernel_eval(const KernelConfig& cfg, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& x2) {
  if (x.size() != x2.size()) {
    throw std::invalid_argument("kernel_eval: input dimension mismatch");
  }
  const double l = cfg.lengthscale;
  return std::exp(-(x - x2).squaredNorm() / (2.0 * l * l));
}

Matrix gram(const KernelConfig& cfg, const InputSet& a, const InputSet& b) {
  if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols()) {
    throw std::invalid_argument("gram: input dimension mismatch");
  }
  Matrix k(a.rows(), b.rows());
  const double inv = 1.0 / (2.0 * cfg.lengthscale * cfg.lengthscale);
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    }
  }
  return k;
}

InputSet union_inputs(std::span<const TaskData> tasks, double tol) {
  Eigen::Index dim = -1;
  std::vector<Vector> points;
  for (const auto& task : tasks) {
    validate(task);
    if (task.size() == 0) continue;
    if (dim < 0) dim = task.inputs.cols();
    if (task.inputs.cols() != dim) {
      throw std::invalid_argument("union_inputs: tasks differ in input dimension");
    }
    for (Eigen::Index r = 0; r < task.inputs.rows(); ++r) {
      const Vector x = task.inputs.row(r).transpose();
      bool seen = false;
      for (const auto& p : points) {
        if ((p - x).cwiseAbs().maxCoeff() <= tol) {
          seen = true;
          break;
        }
      }
      if (!seen) points.push_back(x);
    }
  }
  InputSet out(static_cast<Eigen::Index>(points.size()), dim < 0 ? 1 : dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return out;
}

MomentGaussian exact_posterior(const GpPrior& prior, const TaskData& task,
                               const InputSet& anchor) {
  validate(prior);
  validate(task);
  MomentGaussian out{prior.mean(anchor), gram(prior.kernel, anchor, anchor)};
  if (task.size() == 0) return out;

  const Matrix k_ai = gram(prior.kernel, anchor, task.inputs);
  Matrix noisy = gram(prior.kernel, task.inputs, task.inputs);
  noisy.diagonal().array() += 1.0 / prior.beta;
  const auto llt = cholesky_with_jitter(noisy, "K_ii + I/beta");

  const Vector resid = task.outputs - prior.mean(task.inputs);
  out.mu += k_ai * llt.solve(resid);
  out.sigma -= k_ai * llt.solve(k_ai.transpose());
  out.sigma = symmetrize(out.sigma);
  return out;
}

double clamp_variance(double v) {
  if (v < 0.0) {
    if (v < -1e-10) {
      std::cerr << "warning: negative predictive variance " << v
                << " clamped to 0\n";
    }
    return 0.0;
  }
  return v;
}

PredictionBatch predictive(const GpPrior& prior, const MomentGaussian& rho,
                           const InputSet& anchor, const InputSet& x_plus) {
  if (rho.dim() != anchor.rows()) {
    throw std::invalid_argument("predictive: rho dimension differs from anchor size");
  }
  const Matrix k = gram(prior.kernel, anchor, anchor);
  const auto llt = cholesky_with_jitter(k, "K");
  const Matrix k_ap = gram(prior.kernel, anchor, x_plus);
  const Matrix a = llt.solve(k_ap);  // K⁻¹k, one column per test point
  const Vector centered = rho.mu - prior.mean(anchor);

  PredictionBatch out{Vector(x_plus.rows()), Vector(x_plus.rows())};
  const Matrix sigma_a = rho.sigma * a;
  for (Eigen::Index j = 0; j < x_plus.rows(); ++j) {
    out.mean(j) = prior.mean_at(x_plus.row(j).transpose()) + a.col(j).dot(centered);
    // k(x,x) + kᵀK⁻¹(Σ − K)K⁻¹k = k(x,x) − kᵀK⁻¹k + aᵀΣa
    const Vector xj = x_plus.row(j).transpose();
    const double v = kernel_eval(prior.kernel, xj, xj) - k_ap.col(j).dot(a.col(j)) +
                     a.col(j).dot(sigma_a.col(j));
    out.variance(j) = clamp_variance(v);
  }
  return out;
}

Prediction predictive(const GpPrior& prior, const MomentGaussian& rho,
                      const InputSet& anchor, const Eigen::Ref<const Vector>& x_plus) {
  const InputSet x = x_plus.transpose();
  const auto batch = predictive(prior, rho, anchor, x);
  return {batch.mean(0), batch.variance(0)};
}

PredictionBatch gp_regression(const GpPrior& prior, const TaskData& task,
                              const InputSet& x_plus) {
  validate(prior);
  validate(task);
  PredictionBatch out{prior.mean(x_plus), Vector(x_plus.rows())};
  for (Eigen::Index j = 0; j < x_plus.rows(); ++j) {
    const Vector xj = x_plus.row(j).transpose();
    out.variance(j) = kernel_eval(prior.kernel, xj, xj);
  }
  if (task.size() == 0) return out;

  Matrix noisy = gram(prior.kernel, task.inputs, task.inputs);
  noisy.diagonal().array() += 1.0 / prior.beta;
  const auto llt = cholesky_with_jitter(noisy, "K + I/beta");
  const Matrix k_tp = gram(prior.kernel, task.inputs, x_plus);
  const Vector alpha = llt.solve(task.outputs - prior.mean(task.inputs));
  const Matrix solved = llt.solve(k_tp);
  out.mean += k_tp.transpose() * alpha;
  for (Eigen::Index j = 0; j < x_plus.rows(); ++j) {
    out.variance(j) = clamp_variance(out.variance(j) - k_tp.col(j).dot(solved.col(j)));
  }
  return out;
}

}  // namespace gppca
