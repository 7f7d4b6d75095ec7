#include "gppca/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "gppca/error.hpp"

namespace gppca {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2π)

void require_square(const Matrix& m, Eigen::Index d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    throw std::invalid_argument(std::string(what) + " must be " +
                                std::to_string(d) + "x" + std::to_string(d));
  }
}

// Precision P = −2·sym(Θ), factorized.
Eigen::LLT<Matrix> precision_factor(const NaturalCoord& c) {
  require_square(c.big_theta, c.dim(), "big_theta");
  return cholesky_with_jitter(-2.0 * symmetrize(c.big_theta), "-2*big_theta");
}

// Covariance Σ = sym(H) − ηηᵀ, factorized.
Eigen::LLT<Matrix> covariance_factor(const ExpectationCoord& c, Matrix& sigma) {
  require_square(c.big_h, c.dim(), "big_h");
  sigma = symmetrize(c.big_h) - c.eta * c.eta.transpose();
  return cholesky_with_jitter(sigma, "H - eta*eta^T");
}

}  // namespace

void validate(const MomentGaussian& g) {
  require_square(g.sigma, g.dim(), "sigma");
  const double scale = max_abs(g.sigma);
  if (max_abs(g.sigma - g.sigma.transpose()) > 1e-12 * scale) {
    throw std::invalid_argument("sigma is not symmetric");
  }
}

NaturalCoord moment_to_natural(const MomentGaussian& g) {
  validate(g);
  const auto llt = cholesky_with_jitter(g.sigma, "sigma");
  const Matrix precision = inverse_from(llt);
  return {precision * g.mu, -0.5 * precision};
}

MomentGaussian natural_to_moment(const NaturalCoord& c) {
  const auto llt = precision_factor(c);
  Matrix sigma = inverse_from(llt);
  Vector mu = sigma * c.theta;
  return {std::move(mu), std::move(sigma)};
}

ExpectationCoord moment_to_expectation(const MomentGaussian& g) {
  validate(g);
  return {g.mu, g.sigma + g.mu * g.mu.transpose()};
}

MomentGaussian expectation_to_moment(const ExpectationCoord& c) {
  Matrix sigma;
  covariance_factor(c, sigma);
  return {c.eta, std::move(sigma)};
}

ExpectationCoord natural_to_expectation(const NaturalCoord& c) {
  require_square(c.big_theta, c.dim(), "big_theta");
  // Θ⁻¹ = −(−Θ)⁻¹; factor the positive definite −Θ.
  const auto llt = cholesky_with_jitter(-symmetrize(c.big_theta), "-big_theta");
  const Matrix theta_inv = -inverse_from(llt);
  const Vector t = theta_inv * c.theta;  // Θ⁻¹θ
  Vector eta = -0.5 * t;
  Matrix big_h = 0.25 * t * t.transpose() - 0.5 * theta_inv;
  return {std::move(eta), symmetrize(big_h)};
}

NaturalCoord expectation_to_natural(const ExpectationCoord& c) {
  Matrix sigma;
  const auto llt = covariance_factor(c, sigma);
  const Matrix precision = inverse_from(llt);
  return {precision * c.eta, -0.5 * precision};
}

double log_partition(const NaturalCoord& c) {
  const auto llt = precision_factor(c);
  const Vector mu = llt.solve(c.theta);
  const auto d = static_cast<double>(c.dim());
  return 0.5 * c.theta.dot(mu) - 0.5 * log_det(llt) + 0.5 * d * kLog2Pi;
}

double dual_potential(const ExpectationCoord& c) {
  Matrix sigma;
  const auto llt = covariance_factor(c, sigma);
  const auto d = static_cast<double>(c.dim());
  return -0.5 * log_det(llt) - 0.5 * d * (1.0 + kLog2Pi);
}

double inner_product(const NaturalCoord& xi, const ExpectationCoord& zeta) {
  if (xi.dim() != zeta.dim() || xi.big_theta.rows() != zeta.big_h.rows() ||
      xi.big_theta.cols() != zeta.big_h.cols()) {
    throw std::invalid_argument("inner_product: dimension mismatch");
  }
  return xi.theta.dot(zeta.eta) + (xi.big_theta.array() * zeta.big_h.array()).sum();
}

double kl_divergence(const MomentGaussian& p, const MomentGaussian& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("kl_divergence: dimension mismatch");
  }
  const NaturalCoord xi_q = moment_to_natural(q);
  const ExpectationCoord zeta_p = moment_to_expectation(p);
  return log_partition(xi_q) + dual_potential(zeta_p) - inner_product(xi_q, zeta_p);
}

Eigen::Index coordinate_length(Eigen::Index d) { return d + d * d; }

Eigen::Index gaussian_dim(Eigen::Index length) {
  // Solve d² + d = length.
  const auto d = static_cast<Eigen::Index>(
      std::llround((std::sqrt(1.0 + 4.0 * static_cast<double>(length)) - 1.0) / 2.0));
  if (d < 0 || coordinate_length(d) != length) {
    throw std::invalid_argument("coordinate length " + std::to_string(length) +
                                " is not of the form d + d^2");
  }
  return d;
}

Vector flatten(const NaturalCoord& c) {
  const auto d = c.dim();
  Vector out(coordinate_length(d));
  out.head(d) = c.theta;
  out.tail(d * d) = c.big_theta.reshaped();
  return out;
}

Vector flatten(const ExpectationCoord& c) {
  const auto d = c.dim();
  Vector out(coordinate_length(d));
  out.head(d) = c.eta;
  out.tail(d * d) = c.big_h.reshaped();
  return out;
}

NaturalCoord unflatten_natural(const Eigen::Ref<const Vector>& v) {
  const auto d = gaussian_dim(v.size());
  return {v.head(d), v.tail(d * d).reshaped(d, d)};
}

ExpectationCoord unflatten_expectation(const Eigen::Ref<const Vector>& v) {
  const auto d = gaussian_dim(v.size());
  return {v.head(d), v.tail(d * d).reshaped(d, d)};
}

}  // namespace gppca
