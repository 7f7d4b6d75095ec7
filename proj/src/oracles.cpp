#include "gppca/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace gppca::oracle {
namespace {

Matrix lu_inverse(const Matrix& a, const char* what) {
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw std::invalid_argument(std::string(what) + " is singular");
  return lu.inverse();
}

double max_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

double gaussian_kl(const MomentGaussian& p, const MomentGaussian& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
  const Eigen::PartialPivLU<Matrix> lu_q(q.sigma);
  const Eigen::PartialPivLU<Matrix> lu_p(p.sigma);
  const Vector diff = q.mu - p.mu;
  const double trace = lu_q.solve(p.sigma).trace();
  const double quad = diff.dot(lu_q.solve(diff));
  // Both determinants are positive for valid inputs.
  const double logdet_q = std::log(lu_q.determinant());
  const double logdet_p = std::log(lu_p.determinant());
  return 0.5 * (trace + quad - static_cast<double>(p.dim()) + logdet_q - logdet_p);
}

double condition_number(const Matrix& spd) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spd, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return eig.eigenvalues().maxCoeff() / lo;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Matrix random_spd(Eigen::Index d, std::mt19937_64& rng, double max_condition) {
  for (;;) {
    const Matrix b = random_matrix(d, d, rng);
    Matrix a = b * b.transpose() / static_cast<double>(d);
    a.diagonal().array() += 0.1;
    a = 0.5 * (a + a.transpose());
    if (condition_number(a) <= max_condition) return a;
  }
}

MomentGaussian random_gaussian(Eigen::Index d, std::mt19937_64& rng, double max_condition) {
  return {random_matrix(d, 1, rng).col(0), random_spd(d, rng, max_condition)};
}

double check_woodbury(const Matrix& a, const Matrix& u, const Matrix& b, const Matrix& v) {
  const Matrix a_inv = lu_inverse(a, "A");
  const Matrix b_inv = lu_inverse(b, "B");
  const Matrix lhs = lu_inverse(a + u * b * v, "A + UBV");
  const Matrix rhs = a_inv - a_inv * u * lu_inverse(b_inv + v * a_inv * u, "B⁻¹ + VA⁻¹U") *
                                 v * a_inv;
  return max_diff(lhs, rhs);
}

double check_woodbury_derived(const Matrix& k, const Matrix& b) {
  const Matrix lhs = lu_inverse(k + k * b * k, "K + KBK");
  const Matrix rhs = lu_inverse(k, "K") - lu_inverse(lu_inverse(b, "B") + k, "B⁻¹ + K");
  return max_diff(lhs, rhs);
}

double check_sigma_ratio(const Matrix& k_plus, const Matrix& k, const Matrix& v) {
  lu_inverse(v, "V");
  const Matrix sigma_plus = k_plus + k_plus * v * k;
  const Matrix sigma = k + k * v * k;
  return max_diff(sigma_plus * lu_inverse(sigma, "Σ"), k_plus * lu_inverse(k, "K"));
}

double check_theta_transport(const Matrix& k, const Matrix& v, const Matrix& k_star,
                             const Matrix& k_starstar) {
  lu_inverse(v, "V");
  const Matrix theta_ss = lu_inverse(k_starstar + k_star * v * k_star.transpose(), "Θ∗∗⁻¹");
  const Matrix theta_inv = k + k * v * k;
  const Matrix lhs = theta_ss * k_star * lu_inverse(k, "K") * theta_inv;
  const Matrix rhs = lu_inverse(k_starstar, "K∗∗") * k_star;
  return max_diff(lhs, rhs);
}

MomentGaussian compose_joint(const GpPrior& prior, const MomentGaussian& rho,
                             const InputSet& x, const InputSet& x_plus) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x_plus.rows();
  if (m == 0) return rho;
  const Matrix k = gram(prior.kernel, x, x);
  const Matrix k_px = gram(prior.kernel, x_plus, x);
  const Matrix k_pp = gram(prior.kernel, x_plus, x_plus);
  const Matrix a = k_px * lu_inverse(k, "K");  // f₊ | f has mean μ₊₀ + A(f − μ₀)

  MomentGaussian out{Vector(n + m), Matrix(n + m, n + m)};
  out.mu.head(n) = rho.mu;
  out.mu.tail(m) = prior.mean(x_plus) + a * (rho.mu - prior.mean(x));
  out.sigma.topLeftCorner(n, n) = rho.sigma;
  out.sigma.bottomLeftCorner(m, n) = a * rho.sigma;
  out.sigma.topRightCorner(n, m) = (a * rho.sigma).transpose();
  out.sigma.bottomRightCorner(m, m) = (k_pp - a * k_px.transpose()) + a * rho.sigma * a.transpose();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  return out;
}

double kl_decomposition_check(const GpPrior& prior, const MomentGaussian& rho,
                              const MomentGaussian& rho2, const InputSet& x,
                              const InputSet& x_plus) {
  const double joint = gaussian_kl(compose_joint(prior, rho, x, x_plus),
                                   compose_joint(prior, rho2, x, x_plus));
  return std::abs(joint - gaussian_kl(rho, rho2));
}

double fit_joint_direct(std::span<const TaskData> tasks, const GpPrior& prior,
                        const InputSet& x_plus, Eigen::Index latent_dim,
                        const FitOptions& opts) {
  const InputSet x = union_inputs(tasks);
  std::vector<MomentGaussian> joints;
  joints.reserve(tasks.size());
  for (const auto& task : tasks) {
    joints.push_back(compose_joint(prior, exact_posterior(prior, task, x), x, x_plus));
  }
  const CoordinateSet data = make_coordinate_set(joints, FlatMode::kEFlat);
  return fit(data, latent_dim, opts).objective;
}

Vector grid_search_projection(const CoordinateSet& data, Eigen::Index index,
                              const Subspace& s, double lo, double hi, double step) {
  const Eigen::Index l = s.latent_dim();
  if (l > 2) throw std::invalid_argument("grid search supports L <= 2");
  const auto y = data.dual.col(index);
  const auto count = static_cast<long>(std::floor((hi - lo) / step)) + 1;

  Vector best = Vector::Zero(l);
  double best_value = std::numeric_limits<double>::infinity();
  Vector w(l);
  const long outer = l >= 1 ? count : 1;
  const long inner = l == 2 ? count : 1;
  for (long a = 0; a < outer; ++a) {
    for (long b = 0; b < inner; ++b) {
      if (l >= 1) w(0) = lo + static_cast<double>(a) * step;
      if (l == 2) w(1) = lo + static_cast<double>(b) * step;
      const Vector xhat = reconstruct(w, s);
      const PointEvaluation e = evaluate_point(s.mode, xhat, false);
      if (!e.valid) continue;
      const double value = e.potential + data.dual_potential(index) - xhat.dot(y);
      if (value < best_value) {
        best_value = value;
        best = w;
      }
    }
  }
  return best;
}

}  // namespace gppca::oracle
