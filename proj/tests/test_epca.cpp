#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "doctest.h"
#include "gppca/epca.hpp"
#include "gppca/error.hpp"
#include "gppca/oracles.hpp"

using namespace gppca;

namespace {

MomentGaussian scalar(double mu, double var) {
  return {Vector::Constant(1, mu), Matrix::Constant(1, 1, var)};
}

Vector random_symmetric_direction(Eigen::Index d, std::mt19937_64& rng) {
  Vector v = oracle::random_matrix(coordinate_length(d), 1, rng).col(0);
  symmetrize_coordinates(v);
  return v / v.norm();
}

struct Planted {
  Subspace truth;
  WeightMatrix w;
  CoordinateSet data;
};

// Points ξ₀ + U*wᵢ on a random e-flat subspace, each checked to be valid.
Planted planted(Eigen::Index d, Eigen::Index l, Eigen::Index n, std::uint64_t seed,
                FlatMode mode = FlatMode::kEFlat) {
  std::mt19937_64 rng(seed);
  Planted p;
  const MomentGaussian centre = oracle::random_gaussian(d, rng, 10.0);
  p.truth.mode = mode;
  p.truth.offset = mode == FlatMode::kEFlat ? flatten(moment_to_natural(centre))
                                            : flatten(moment_to_expectation(centre));
  p.truth.basis.resize(p.truth.offset.size(), l);
  for (Eigen::Index k = 0; k < l; ++k) {
    p.truth.basis.col(k) = 0.15 * random_symmetric_direction(d, rng);
  }
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  p.w.resize(n, l);
  Matrix primal(p.truth.offset.size(), n);
  for (Eigen::Index i = 0; i < n;) {
    for (Eigen::Index k = 0; k < l; ++k) p.w(i, k) = unif(rng);
    const Vector x = reconstruct(p.w.row(i).transpose(), p.truth);
    if (!evaluate_point(mode, x, false).valid) continue;
    primal.col(i++) = x;
  }
  p.data = coordinate_set_from_primal(primal, mode);
  return p;
}

double fd_check(const WeightMatrix& w, const Subspace& s, const CoordinateSet& data) {
  const Gradients g = gradients(w, s, data);
  const double h = 1e-6;
  double worst = 0.0;
  auto compare = [&](double analytic, double fd) {
    worst = std::max(worst, std::abs(analytic - fd) / std::max(1e-3, std::abs(analytic)));
  };
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      WeightMatrix a = w, b = w;
      a(i, k) += h;
      b(i, k) -= h;
      compare(g.weights(i, k), (objective(a, s, data) - objective(b, s, data)) / (2 * h));
    }
  }
  for (Eigen::Index r = 0; r < s.offset.size(); ++r) {
    Subspace a = s, b = s;
    a.offset(r) += h;
    b.offset(r) -= h;
    compare(g.offset(r), (objective(w, a, data) - objective(w, b, data)) / (2 * h));
    for (Eigen::Index k = 0; k < s.latent_dim(); ++k) {
      Subspace c = s, e = s;
      c.basis(r, k) += h;
      e.basis(r, k) -= h;
      compare(g.basis(r, k), (objective(w, c, data) - objective(w, e, data)) / (2 * h));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("reconstruct is affine") {
  Subspace s{Vector::LinSpaced(2, 1.0, 2.0), Matrix::Identity(2, 2) * 3.0, FlatMode::kEFlat};
  CHECK(reconstruct(Vector::Zero(2), s) == s.offset);
  Subspace s1{s.offset, s.basis.leftCols(1), FlatMode::kEFlat};
  CHECK(reconstruct(Vector::Ones(1), s1) == s.offset + s.basis.col(0));
  Vector w1(2), w2(2);
  w1 << 0.3, -1.0;
  w2 << 2.0, 0.5;
  const Vector mid = reconstruct(0.5 * w1 + 0.5 * w2, s);
  CHECK((mid - 0.5 * reconstruct(w1, s) - 0.5 * reconstruct(w2, s)).norm() < 1e-15);
  CHECK_THROWS(reconstruct(Vector::Zero(3), s));
}

TEST_CASE("objective examples") {
  std::vector<MomentGaussian> pts{scalar(0, 1), scalar(1, 1)};
  const CoordinateSet data = make_coordinate_set(pts, FlatMode::kEFlat);
  Subspace s{flatten(moment_to_natural(scalar(0.5, 1))), Matrix(2, 0), FlatMode::kEFlat};
  CHECK(objective(WeightMatrix(2, 0), s, data) == doctest::Approx(0.25).epsilon(1e-12));

  std::vector<MomentGaussian> one{scalar(2, 3)};
  const CoordinateSet single = make_coordinate_set(one, FlatMode::kEFlat);
  Subspace at{single.primal.col(0), Matrix(2, 0), FlatMode::kEFlat};
  CHECK(std::abs(objective(WeightMatrix(1, 0), at, single)) < 1e-12);

  const Planted p = planted(2, 1, 4, 3);
  CHECK(std::abs(objective(p.w, p.truth, p.data)) < 1e-10);
  const Gradients g = gradients(p.w, p.truth, p.data);
  CHECK(g.weights.norm() < 1e-8);
  CHECK(g.basis.norm() < 1e-8);
  CHECK(g.offset.norm() < 1e-8);
}

TEST_CASE("objective reports the invalid point") {
  std::vector<MomentGaussian> pts{scalar(0, 1), scalar(1, 1), scalar(2, 1)};
  const CoordinateSet data = make_coordinate_set(pts, FlatMode::kEFlat);
  Subspace s{data.primal.col(0), Matrix::Zero(2, 1), FlatMode::kEFlat};
  s.basis(1, 0) = 1.0;  // moves Θ towards positive values
  WeightMatrix w = WeightMatrix::Zero(3, 1);
  w(2, 0) = 1.0;
  try {
    objective(w, s, data);
    FAIL("expected a validity error");
  } catch (const ValidityError& e) {
    CHECK(e.index() == 2);
  }
}

TEST_CASE("gradients match finite differences") {
  std::mt19937_64 rng(21);
  for (FlatMode mode : {FlatMode::kEFlat, FlatMode::kMFlat}) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<MomentGaussian> pts;
      for (int i = 0; i < 3; ++i) pts.push_back(oracle::random_gaussian(2, rng, 10.0));
      const CoordinateSet data = make_coordinate_set(pts, mode);
      Subspace s{data.primal.rowwise().mean(), Matrix(data.length(), 1), mode};
      s.basis.col(0) = 0.05 * random_symmetric_direction(2, rng);
      WeightMatrix w = oracle::random_matrix(3, 1, rng);
      CHECK(fd_check(w, s, data) < 1e-4);
    }
  }
}

TEST_CASE("m-PCA mirrors e-PCA on swapped roles") {
  // With the m-flat mode the divergence is KL[p̂ ‖ p]: check that explicitly
  // and that the gradient matches its own finite differences.
  std::mt19937_64 rng(22);
  std::vector<MomentGaussian> pts{scalar(0.1, 1.0), scalar(-0.4, 0.5), scalar(0.8, 2.0)};
  const CoordinateSet data = make_coordinate_set(pts, FlatMode::kMFlat);
  Subspace s{data.primal.rowwise().mean(), Matrix(2, 1), FlatMode::kMFlat};
  s.basis << 0.1, 0.2;
  WeightMatrix w(3, 1);
  w << 0.5, -0.3, 0.1;
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vector x = reconstruct(w.row(i).transpose(), s);
    const MomentGaussian fit = expectation_to_moment(unflatten_expectation(x));
    expected += oracle::gaussian_kl(fit, pts[static_cast<std::size_t>(i)]);
  }
  CHECK(objective(w, s, data) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(fd_check(w, s, data) < 1e-4);

  const CoordinateSet edata = make_coordinate_set(pts, FlatMode::kEFlat);
  Subspace es{edata.primal.rowwise().mean(), Matrix(2, 1), FlatMode::kEFlat};
  es.basis << 0.1, 0.05;
  double eexpected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vector x = reconstruct(w.row(i).transpose(), es);
    const MomentGaussian fit = natural_to_moment(unflatten_natural(x));
    eexpected += oracle::gaussian_kl(pts[static_cast<std::size_t>(i)], fit);
  }
  CHECK(objective(w, es, edata) == doctest::Approx(eexpected).epsilon(1e-10));
}

TEST_CASE("project_point") {
  FitOptions opts;
  opts.rel_tol = 1e-12;
  SUBCASE("points on the subspace") {
    const Planted p = planted(3, 2, 6, 5);
    for (Eigen::Index i = 0; i < 6; ++i) {
      const ProjectionResult r = project_point(p.data, i, p.truth, opts);
      CHECK((r.weights - p.w.row(i).transpose()).norm() < 1e-6);
    }
  }
  SUBCASE("empty subspace") {
    const Planted p = planted(2, 1, 2, 6);
    Subspace s{p.truth.offset, Matrix(p.truth.offset.size(), 0), FlatMode::kEFlat};
    CHECK(project_point(p.data, 0, s, opts).weights.size() == 0);
  }
  SUBCASE("matches grid search") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<MomentGaussian> pts{oracle::random_gaussian(2, rng, 10.0)};
      const CoordinateSet data = make_coordinate_set(pts, FlatMode::kEFlat);
      const MomentGaussian anchor = oracle::random_gaussian(2, rng, 10.0);
      Subspace s{flatten(moment_to_natural(anchor)), Matrix(6, 1), FlatMode::kEFlat};
      s.basis.col(0) = data.primal.col(0) - s.offset;
      s.basis.col(0) += 0.1 * random_symmetric_direction(2, rng);
      const Vector w = project_point(data, 0, s, opts).weights;
      const Vector grid = oracle::grid_search_projection(data, 0, s, -0.5, 2.0, 1e-3);
      CHECK((w - grid).cwiseAbs().maxCoeff() < 2e-3);
    }
  }
  SUBCASE("non-convergence is reported") {
    const Planted p = planted(3, 2, 6, 5);
    Subspace shifted = p.truth;
    shifted.offset += 0.05 * p.truth.basis.col(0).cwiseAbs();
    symmetrize_coordinates(shifted.offset);
    FitOptions tight = opts;
    tight.max_iters = 1;
    tight.learning_rate = 1e-12;
    CHECK_THROWS_AS(project_point(p.data, 0, shifted, tight), ConvergenceError);
  }
}

TEST_CASE("fit on identical points") {
  std::vector<MomentGaussian> pts(4, scalar(1.5, 0.3));
  const CoordinateSet data = make_coordinate_set(pts, FlatMode::kEFlat);
  const FitResult r = fit(data, 0, FitOptions{});
  CHECK(r.objective < 1e-12);
  CHECK((r.subspace.offset - data.primal.col(0)).norm() < 1e-10);

  const FitResult one = fit(make_coordinate_set(std::span(pts).first(1), FlatMode::kEFlat), 0,
                            FitOptions{});
  CHECK(one.subspace.latent_dim() == 0);
  CHECK(std::abs(one.objective) < 1e-14);
}

TEST_CASE("fit rejects too many latent dimensions") {
  std::vector<MomentGaussian> pts{scalar(0, 1), scalar(1, 1)};
  const CoordinateSet data = make_coordinate_set(pts, FlatMode::kEFlat);
  CHECK_THROWS_AS(fit(data, 2, FitOptions{}), std::invalid_argument);
  CHECK_THROWS_AS(fit(data, -1, FitOptions{}), std::invalid_argument);
  FitOptions bad;
  bad.backtrack_factor = 1.0;
  CHECK_THROWS_AS(fit(data, 1, bad), std::invalid_argument);
}

TEST_CASE("planted subspace recovery") {
  const Planted p = planted(3, 2, 10, 7);
  FitOptions opts;
  const FitResult r = fit(p.data, 2, opts);
  INFO("iterations " << r.iterations << " objective " << r.objective);
  CHECK(r.objective < 1e-6);
  CHECK(r.iterations <= 10000);
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Vector x = reconstruct(r.weights.row(i).transpose(), r.subspace);
    const Vector zeta = evaluate_point(FlatMode::kEFlat, x, true).dual;
    CHECK((zeta - p.data.dual.col(i)).cwiseAbs().maxCoeff() < 1e-4);
  }
  // Unit-norm, independent basis.
  for (Eigen::Index k = 0; k < 2; ++k) CHECK(r.subspace.basis.col(k).norm() == doctest::Approx(1.0));
  Eigen::JacobiSVD<Matrix> svd(r.subspace.basis);
  CHECK(svd.singularValues().minCoeff() > 1e-10);
  CHECK(objective(r.weights, r.subspace, p.data) == r.objective);
}

TEST_CASE("affine span of I points is lossless") {
  std::mt19937_64 rng(24);
  std::vector<MomentGaussian> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(oracle::random_gaussian(2, rng, 10.0));
  const CoordinateSet data = make_coordinate_set(pts, FlatMode::kEFlat);
  const FitResult r = fit(data, 3, FitOptions{});
  INFO("iterations " << r.iterations);
  CHECK(r.objective < 1e-6);
}

TEST_CASE("projection is idempotent on the fitted subspace") {
  const Planted p = planted(2, 1, 5, 8);
  const FitResult r = fit(p.data, 1, FitOptions{});
  FitOptions opts;
  opts.rel_tol = 1e-12;
  const Vector w = Vector::Constant(1, 0.3);
  const Vector x = reconstruct(w, r.subspace);
  const CoordinateSet single = coordinate_set_from_primal(x, FlatMode::kEFlat);
  CHECK((project_point(single, 0, r.subspace, opts).weights - w).norm() < 1e-6);
}

TEST_CASE("serial and parallel evaluation agree bitwise") {
  const Planted p = planted(3, 2, 10, 9);
  Subspace s = p.truth;
  s.offset += 0.01 * p.truth.basis.col(1);
  const Matrix recon = reconstruct_all(p.w * 0.9, s);
  const BatchEvaluation a =
      evaluate_batch_serial(FlatMode::kEFlat, recon, p.data.dual, p.data.dual_potential, true);
  const BatchEvaluation b =
      evaluate_batch_parallel(FlatMode::kEFlat, recon, p.data.dual, p.data.dual_potential, true);
  CHECK(a.total() == b.total());
  CHECK((a.residual.array() == b.residual.array()).all());

  FitOptions serial;
  serial.parallel = false;
  FitOptions parallel;
  const FitResult rs = fit(p.data, 2, serial);
  const FitResult rp = fit(p.data, 2, parallel);
  CHECK(rs.objective == rp.objective);
  CHECK((rs.weights.array() == rp.weights.array()).all());
}

TEST_CASE("fit is deterministic") {
  const Planted p = planted(2, 1, 6, 10);
  const FitResult a = fit(p.data, 1, FitOptions{});
  const FitResult b = fit(p.data, 1, FitOptions{});
  CHECK(a.objective == b.objective);
  CHECK((a.subspace.basis.array() == b.subspace.basis.array()).all());
}

TEST_CASE("alternating descent reaches the same optimum") {
  const Planted p = planted(2, 1, 6, 11);
  FitOptions alt;
  alt.method = FitMethod::kAlternating;
  alt.max_iters = 50000;
  const FitResult a = fit(p.data, 1, alt);
  const FitResult q = fit(p.data, 1, FitOptions{});
  INFO("alternating " << a.objective << " in " << a.iterations << ", lbfgs " << q.objective
                      << " in " << q.iterations);
  for (std::size_t k = 1; k < a.trace.size(); ++k) CHECK(a.trace[k] <= a.trace[k - 1]);
  CHECK(a.objective < 1e-5);
  CHECK(q.objective < 1e-8);
  CHECK(q.iterations < a.iterations);
}
