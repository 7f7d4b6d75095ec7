#include "gppca/epca.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "gppca/error.hpp"

namespace gppca {
namespace {

constexpr double kArmijo = 1e-4;
constexpr double kStepGrowth = 1.25;

double dual_potential_of(FlatMode mode, const Eigen::Ref<const Vector>& y) {
  return mode == FlatMode::kEFlat ? dual_potential(unflatten_expectation(y))
                                  : log_partition(unflatten_natural(y));
}

BatchEvaluation evaluate(const Matrix& recon, const CoordinateSet& data, bool with_gradient,
                         bool parallel) {
  return parallel ? evaluate_batch_parallel(data.mode, recon, data.dual,
                                            data.dual_potential, with_gradient)
                  : evaluate_batch_serial(data.mode, recon, data.dual, data.dual_potential,
                                          with_gradient);
}

[[noreturn]] void throw_invalid(Eigen::Index index) {
  throw ValidityError("reconstruction of point " + std::to_string(index) +
                          " left the positive-definite cone",
                      static_cast<long>(index));
}

void check_shapes(const WeightMatrix& w, const Subspace& s, const CoordinateSet& data) {
  if (s.offset.size() != data.length() || s.basis.rows() != data.length()) {
    throw std::invalid_argument("subspace and data differ in coordinate length");
  }
  if (w.rows() != data.points() || w.cols() != s.latent_dim()) {
    throw std::invalid_argument("weight matrix must be I x L");
  }
  if (s.mode != data.mode) {
    throw std::invalid_argument("subspace and data use different flat modes");
  }
}

enum class Search { kAccepted, kNoDescent, kInvalid };

// Backtracking from `step`; on success grows `step` for the next call, on
// failure leaves it unchanged so a later iteration is not stuck at 2⁻⁴⁰.
template <class Candidate>
Search line_search(Candidate&& candidate, double e_cur, double grad_sq, double& step,
                   const FitOptions& opts, double& e_new, double& taken) {
  double s = step;
  bool any_valid = false;
  for (int k = 0; k <= opts.max_backtracks; ++k) {
    const BatchEvaluation ev = candidate(s);
    if (ev.valid()) {
      any_valid = true;
      const double e = ev.total();
      if (e <= e_cur - kArmijo * s * grad_sq) {
        e_new = e;
        taken = s;
        step = s * kStepGrowth;
        return Search::kAccepted;
      }
    }
    s *= opts.backtrack_factor;
  }
  return any_valid ? Search::kNoDescent : Search::kInvalid;
}

struct ProjectionRun {
  ProjectionResult result;
  bool converged = false;
};

ProjectionRun project_impl(const CoordinateSet& data, Eigen::Index index, const Subspace& s,
                           const FitOptions& opts, const Vector& start) {
  const Eigen::Index l = s.latent_dim();
  const auto y = data.dual.col(index);
  const double fstar = data.dual_potential(index);
  const double threshold = opts.rel_tol * y.norm();

  auto eval = [&](const Vector& w, bool with_grad) {
    const Vector x = reconstruct(w, s);
    PointEvaluation e = evaluate_point(s.mode, x, with_grad);
    if (e.valid) {
      e.potential = e.potential + fstar - x.dot(y);
      if (with_grad) e.dual -= y;
    }
    return e;  // potential now holds the divergence, dual the residual
  };

  ProjectionRun run;
  Vector w = start.size() == l ? start : Vector::Zero(l);
  PointEvaluation cur = eval(w, true);
  if (!cur.valid && start.size() == l) {
    w.setZero();
    cur = eval(w, true);
  }
  if (!cur.valid) throw_invalid(index);

  auto gradient_at = [&](const Vector& v) -> Vector {
    const PointEvaluation e = eval(v, true);
    if (!e.valid) return Vector();
    return s.basis.transpose() * e.dual;
  };

  for (int it = 0;; ++it) {
    const Vector g = s.basis.transpose() * cur.dual;
    run.result.weights = w;
    run.result.objective = cur.potential;
    run.result.iterations = it;
    run.result.gradient_norm = g.norm();
    if (l == 0 || g.norm() < threshold) {
      run.converged = true;
      return run;
    }
    if (it >= opts.max_iters) return run;

    // L is small, so a Newton direction from a finite-difference Hessian of
    // the analytic gradient is cheap; plain descent is the fallback.
    Vector dir = -g;
    Matrix hess(l, l);
    bool hess_ok = true;
    for (Eigen::Index k = 0; k < l && hess_ok; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(w(k)));
      Vector a = w, b = w;
      a(k) += h;
      b(k) -= h;
      const Vector ga = gradient_at(a), gb = gradient_at(b);
      hess_ok = ga.size() == l && gb.size() == l;
      if (hess_ok) hess.col(k) = (ga - gb) / (2.0 * h);
    }
    double first_step = 1.0;
    if (hess_ok) {
      Eigen::LLT<Matrix> llt;
      if (try_cholesky(symmetrize(hess), llt)) {
        dir = -llt.solve(g);
      } else {
        hess_ok = false;
      }
    }
    if (!hess_ok) first_step = opts.learning_rate;
    const double slope = g.dot(dir);

    double t = first_step;
    bool accepted = false;
    for (int k = 0; k <= opts.max_backtracks; ++k) {
      const Vector cand = w + t * dir;
      const PointEvaluation next = eval(cand, false);
      if (next.valid && next.potential <= cur.potential + kArmijo * t * slope) {
        // Decreases below the rounding level of the summed terms are noise.
        const double noise = 1e-14 * (std::abs(fstar) + std::abs(cand.dot(s.basis.transpose() * y)) +
                                      std::abs(s.offset.dot(y)));
        if (cur.potential - next.potential <= noise) {
          run.converged = true;
          return run;
        }
        w = cand;
        accepted = true;
        break;
      }
      t *= opts.backtrack_factor;
    }
    if (!accepted) {
      // No representable decrease left: the objective is flat to rounding.
      run.converged = true;
      return run;
    }
    cur = eval(w, true);
  }
}

Vector random_unit(Eigen::Index length, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(length);
  for (Eigen::Index k = 0; k < length; ++k) v(k) = normal(rng);
  symmetrize_coordinates(v);
  return v / v.norm();
}

Matrix initial_basis(const CoordinateSet& data, Eigen::Index latent_dim, std::uint64_t seed) {
  const Eigen::Index len = data.length();
  Matrix basis(len, latent_dim);
  if (latent_dim == 0) return basis;

  const Vector mean = data.primal.rowwise().mean();
  const Matrix centered = data.primal.colwise() - mean;
  // Right singular vectors of the I×D data matrix via the small I×I Gram.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(centered.transpose() * centered);
  const Vector& lambda = eig.eigenvalues();
  const double top = std::max(lambda.maxCoeff(), 0.0);
  const Eigen::Index n = lambda.size();

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x62617369u};
  std::mt19937_64 rng(seq);
  for (Eigen::Index k = 0; k < latent_dim; ++k) {
    const double lk = lambda(n - 1 - k);
    Vector u;
    if (lk > 1e-12 * top && lk > 0.0) {
      u = centered * eig.eigenvectors().col(n - 1 - k) / std::sqrt(lk);
    } else {
      // Degenerate data: any direction independent of the previous ones.
      u = random_unit(len, rng);
    }
    for (Eigen::Index j = 0; j < k; ++j) u -= basis.col(j).dot(u) * basis.col(j);
    u /= u.norm();
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0.0) u = -u;
    basis.col(k) = u;
  }
  return basis;
}

// Alternating descent: a weight step, then an offset-and-basis step, each
// with its own adaptive backtracking step size.
void run_alternating(const CoordinateSet& data, Subspace& s, WeightMatrix& w,
                     const FitOptions& opts, FitResult& res) {
  const Eigen::Index n = data.points();
  const Eigen::Index latent_dim = s.latent_dim();
  BatchEvaluation cur = evaluate(reconstruct_all(w, s), data, true, opts.parallel);
  if (!cur.valid()) throw_invalid(cur.first_invalid);
  double e = cur.total();
  double step_w = opts.learning_rate;
  double step_u = opts.learning_rate;

  for (int it = 0; it < opts.max_iters; ++it) {
    const double e_start = e;
    bool moved = false;

    if (latent_dim > 0) {
      const Matrix gw = cur.residual.transpose() * s.basis;
      const Matrix base = reconstruct_all(w, s);
      const Matrix step_dir = s.basis * gw.transpose();  // D×I change per unit step
      double e_new = e;
      double t = 0.0;
      const Search r = line_search(
          [&](double a) { return evaluate(base - a * step_dir, data, false, opts.parallel); },
          e, gw.squaredNorm(), step_w, opts, e_new, t);
      if (r == Search::kAccepted) {
        w -= t * gw;
        e = e_new;
        moved = true;
        cur = evaluate(reconstruct_all(w, s), data, true, opts.parallel);
      } else if (r == Search::kInvalid) {
        throw ValidityError("no valid weight step at the smallest step size", -1);
      }
    }

    {
      Vector g0 = cur.residual.rowwise().sum();
      Matrix gu = cur.residual * w;
      symmetrize_coordinates(g0);
      for (Eigen::Index l = 0; l < latent_dim; ++l) {
        Eigen::Ref<Vector> col = gu.col(l);
        symmetrize_coordinates(col);
      }
      const double grad_sq = g0.squaredNorm() + gu.squaredNorm();
      const Matrix base = reconstruct_all(w, s);
      Matrix delta = g0.replicate(1, n);
      if (latent_dim > 0) delta.noalias() += gu * w.transpose();
      double e_new = e;
      double t = 0.0;
      const Search r = line_search(
          [&](double a) { return evaluate(base - a * delta, data, false, opts.parallel); }, e,
          grad_sq, step_u, opts, e_new, t);
      if (r == Search::kAccepted) {
        s.offset -= t * g0;
        s.basis -= t * gu;
        e = e_new;
        moved = true;
        cur = evaluate(reconstruct_all(w, s), data, true, opts.parallel);
      } else if (r == Search::kInvalid) {
        throw ValidityError("no valid subspace step at the smallest step size", -1);
      }
    }

    res.iterations = it + 1;
    res.trace.push_back(e);
    if (!moved) {
      res.converged = true;
      break;
    }
    const double scale = std::max(std::abs(e_start), std::numeric_limits<double>::min());
    if ((e_start - e) / scale < opts.rel_tol) {
      res.converged = true;
      break;
    }
  }

}

// Packed variables [vec W; u₀; vec U] for the joint quasi-Newton fit.
Vector pack(const WeightMatrix& w, const Subspace& s) {
  const Eigen::Index nw = w.size(), len = s.offset.size();
  Vector x(nw + len + s.basis.size());
  x.head(nw) = w.reshaped();
  x.segment(nw, len) = s.offset;
  x.tail(s.basis.size()) = s.basis.reshaped();
  return x;
}

void unpack(const Vector& x, WeightMatrix& w, Subspace& s) {
  const Eigen::Index nw = w.size(), len = s.offset.size();
  w.reshaped() = x.head(nw);
  s.offset = x.segment(nw, len);
  s.basis.reshaped() = x.tail(s.basis.size());
}

Vector packed_gradient(const Matrix& residual, const WeightMatrix& w, const Subspace& s) {
  Vector g(w.size() + s.offset.size() + s.basis.size());
  g.head(w.size()) = (residual.transpose() * s.basis).reshaped();
  g.segment(w.size(), s.offset.size()) = residual.rowwise().sum();
  g.tail(s.basis.size()) = (residual * w).reshaped();
  return g;
}

// Limited-memory BFGS on all variables at once with Armijo backtracking.
// Each accepted step decreases the objective, and every trial point is
// checked for validity before its value is used.
void run_lbfgs(const CoordinateSet& data, Subspace& s, WeightMatrix& w, const FitOptions& opts,
               FitResult& res) {
  constexpr std::size_t kMemory = 10;
  Vector x = pack(w, s);
  WeightMatrix wt = w;
  Subspace st = s;
  auto recon = [&](const Vector& v) {
    unpack(v, wt, st);
    return reconstruct_all(wt, st);
  };

  BatchEvaluation cur = evaluate(recon(x), data, true, opts.parallel);
  if (!cur.valid()) throw_invalid(cur.first_invalid);
  double e = cur.total();
  unpack(x, wt, st);
  Vector g = packed_gradient(cur.residual, wt, st);

  std::vector<Vector> ss, ys;
  std::vector<double> rhos;
  double plain_step = opts.learning_rate;

  for (int it = 0; it < opts.max_iters; ++it) {
    const bool quasi_newton = !ss.empty();
    Vector d = -g;
    if (quasi_newton) {
      std::vector<double> alpha(ss.size());
      for (std::size_t k = ss.size(); k-- > 0;) {
        alpha[k] = rhos[k] * ss[k].dot(d);
        d -= alpha[k] * ys[k];
      }
      d *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
      for (std::size_t k = 0; k < ss.size(); ++k) {
        const double beta = rhos[k] * ys[k].dot(d);
        d += (alpha[k] - beta) * ss[k];
      }
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      ss.clear(), ys.clear(), rhos.clear();
    }
    if (slope == 0.0) {
      res.converged = true;
      break;
    }

    double t = ss.empty() ? plain_step : 1.0;
    bool accepted = false, any_valid = false;
    double e_new = e;
    Vector x_new;
    for (int k = 0; k <= opts.max_backtracks; ++k) {
      x_new = x + t * d;
      const BatchEvaluation ev = evaluate(recon(x_new), data, false, opts.parallel);
      if (ev.valid()) {
        any_valid = true;
        if (ev.total() <= e + kArmijo * t * slope) {
          e_new = ev.total();
          accepted = true;
          break;
        }
      }
      t *= opts.backtrack_factor;
    }
    if (!accepted) {
      if (!ss.empty()) {
        // Stale curvature information: restart from the plain gradient.
        ss.clear(), ys.clear(), rhos.clear();
        continue;
      }
      if (!any_valid) throw ValidityError("no valid step at the smallest step size", -1);
      res.converged = true;
      break;
    }
    if (ss.empty()) plain_step = t * kStepGrowth;

    cur = evaluate(recon(x_new), data, true, opts.parallel);
    const Vector g_new = packed_gradient(cur.residual, wt, st);
    const Vector sk = x_new - x, yk = g_new - g;
    const double sy = sk.dot(yk);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      if (ss.size() == kMemory) {
        ss.erase(ss.begin()), ys.erase(ys.begin()), rhos.erase(rhos.begin());
      }
      ss.push_back(sk), ys.push_back(yk), rhos.push_back(1.0 / sy);
    }
    const double e_old = e;
    x = x_new;
    g = g_new;
    e = e_new;
    res.iterations = it + 1;
    res.trace.push_back(e);
    const double scale = std::max(std::abs(e_old), std::numeric_limits<double>::min());
    if (quasi_newton && (e_old - e) / scale < opts.rel_tol) {
      res.converged = true;
      break;
    }
  }
  unpack(x, w, s);
}

}  // namespace

void symmetrize_coordinates(Eigen::Ref<Vector> x) {
  const Eigen::Index d = gaussian_dim(x.size());
  auto m = x.tail(d * d).reshaped(d, d);
  const Matrix sym = symmetrize(m);
  m = sym;
}

CoordinateSet make_coordinate_set(std::span<const MomentGaussian> gaussians, FlatMode mode) {
  if (gaussians.empty()) throw std::invalid_argument("no Gaussians given");
  const Eigen::Index d = gaussians.front().dim();
  const Eigen::Index len = coordinate_length(d);
  const auto n = static_cast<Eigen::Index>(gaussians.size());

  CoordinateSet out{mode, Matrix(len, n), Matrix(len, n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const MomentGaussian& g = gaussians[static_cast<std::size_t>(i)];
    validate(g);
    if (g.dim() != d) throw std::invalid_argument("Gaussians differ in dimension");
    const NaturalCoord xi = moment_to_natural(g);
    const ExpectationCoord zeta = moment_to_expectation(g);
    if (mode == FlatMode::kEFlat) {
      out.primal.col(i) = flatten(xi);
      out.dual.col(i) = flatten(zeta);
      out.dual_potential(i) = dual_potential(zeta);
    } else {
      out.primal.col(i) = flatten(zeta);
      out.dual.col(i) = flatten(xi);
      out.dual_potential(i) = log_partition(xi);
    }
  }
  return out;
}

CoordinateSet coordinate_set_from_primal(const Matrix& primal, FlatMode mode) {
  CoordinateSet out{mode, primal, Matrix(primal.rows(), primal.cols()), Vector(primal.cols())};
  for (Eigen::Index i = 0; i < primal.cols(); ++i) {
    const PointEvaluation e = evaluate_point(mode, primal.col(i), true);
    if (!e.valid) {
      throw ValidityError("point " + std::to_string(i) + " is not a valid Gaussian",
                          static_cast<long>(i));
    }
    out.dual.col(i) = e.dual;
    out.dual_potential(i) = dual_potential_of(mode, e.dual);
  }
  return out;
}

void validate(const FitOptions& opts) {
  if (!(opts.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (opts.max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(opts.rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be positive");
  if (!(opts.backtrack_factor > 0.0 && opts.backtrack_factor < 1.0)) {
    throw std::invalid_argument("backtrack_factor must lie in (0, 1)");
  }
  if (opts.max_backtracks < 0) throw std::invalid_argument("max_backtracks must be >= 0");
}

Vector reconstruct(const Eigen::Ref<const Vector>& w, const Subspace& s) {
  if (w.size() != s.latent_dim()) {
    throw std::invalid_argument("weight vector length differs from latent dimension");
  }
  Vector x = s.offset;
  if (w.size() > 0) x.noalias() += s.basis * w;
  return x;
}

Matrix reconstruct_all(const WeightMatrix& w, const Subspace& s) {
  if (w.cols() != s.latent_dim()) {
    throw std::invalid_argument("weight matrix width differs from latent dimension");
  }
  Matrix x = s.offset.replicate(1, w.rows());
  if (w.cols() > 0) x.noalias() += s.basis * w.transpose();
  return x;
}

double objective(const WeightMatrix& w, const Subspace& s, const CoordinateSet& data) {
  check_shapes(w, s, data);
  const BatchEvaluation ev = evaluate_batch_serial(data.mode, reconstruct_all(w, s), data.dual,
                                                   data.dual_potential, false);
  if (!ev.valid()) throw_invalid(ev.first_invalid);
  return ev.total();
}

Gradients gradients(const WeightMatrix& w, const Subspace& s, const CoordinateSet& data) {
  check_shapes(w, s, data);
  const BatchEvaluation ev = evaluate_batch_serial(data.mode, reconstruct_all(w, s), data.dual,
                                                   data.dual_potential, true);
  if (!ev.valid()) throw_invalid(ev.first_invalid);
  return {ev.residual.transpose() * s.basis, ev.residual.rowwise().sum(), ev.residual * w};
}

ProjectionResult project_point(const CoordinateSet& data, Eigen::Index index,
                               const Subspace& s, const FitOptions& opts, const Vector& start) {
  validate(opts);
  if (index < 0 || index >= data.points()) throw std::out_of_range("point index out of range");
  if (s.offset.size() != data.length() || s.mode != data.mode) {
    throw std::invalid_argument("subspace does not match the point's coordinates");
  }
  ProjectionRun run = project_impl(data, index, s, opts, start);
  if (!run.converged) {
    throw ConvergenceError("projection did not converge within " +
                               std::to_string(opts.max_iters) +
                               " iterations; gradient norm " +
                               std::to_string(run.result.gradient_norm),
                           run.result.gradient_norm);
  }
  return run.result;
}

FitResult fit(const CoordinateSet& data, Eigen::Index latent_dim, const FitOptions& opts) {
  validate(opts);
  const Eigen::Index n = data.points();
  if (n < 1) throw std::invalid_argument("fit needs at least one point");
  if (latent_dim < 0 || latent_dim > n - 1) {
    throw std::invalid_argument("latent dimension must satisfy 0 <= L <= I-1 (L = " +
                                std::to_string(latent_dim) + ", I = " + std::to_string(n) +
                                ")");
  }

  FitResult res;
  Subspace& s = res.subspace;
  s.mode = data.mode;
  if (n == 1) {
    s.offset = data.primal.col(0);
  } else {
    s.offset = dual_to_primal(data.mode, data.dual.rowwise().mean());
  }
  symmetrize_coordinates(s.offset);
  s.basis = initial_basis(data, latent_dim, opts.seed);
  WeightMatrix& w = res.weights;
  w = WeightMatrix::Zero(n, latent_dim);

  if (latent_dim > 0 && opts.method == FitMethod::kLbfgs) {
    // Start every wᵢ at its projection onto the initial subspace.
    std::vector<Vector> start(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1) if (opts.parallel)
    for (Eigen::Index i = 0; i < n; ++i) {
      start[static_cast<std::size_t>(i)] = project_impl(data, i, s, opts, Vector()).result.weights;
    }
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) = start[static_cast<std::size_t>(i)];
  }

  if (opts.method == FitMethod::kAlternating) {
    run_alternating(data, s, w, opts, res);
  } else {
    run_lbfgs(data, s, w, opts, res);
  }

  if (latent_dim > 0) {
    // Settle every weight vector against the final subspace, so each row of W
    // is the projection of its own point.
    std::vector<Vector> settled(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1) if (opts.parallel)
    for (Eigen::Index i = 0; i < n; ++i) {
      settled[static_cast<std::size_t>(i)] =
          project_impl(data, i, s, opts, w.row(i).transpose()).result.weights;
    }
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) = settled[static_cast<std::size_t>(i)];

    for (Eigen::Index l = 0; l < latent_dim; ++l) {
      const double norm = s.basis.col(l).norm();
      s.basis.col(l) /= norm;
      w.col(l) *= norm;
    }
  }
  res.objective = objective(w, s, data);
  return res;
}

std::string to_string(FitMethod method) {
  return method == FitMethod::kLbfgs ? "lbfgs" : "alternating";
}

FitMethod parse_fit_method(const std::string& s) {
  if (s == "lbfgs") return FitMethod::kLbfgs;
  if (s == "alternating") return FitMethod::kAlternating;
  throw std::invalid_argument("unknown fit method '" + s + "' (expected lbfgs|alternating)");
}

}  // namespace gppca
