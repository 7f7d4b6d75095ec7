#include "gppca/gp_pca.hpp"

#include <exception>
#include <limits>
#include <stdexcept>

#include "gppca/error.hpp"

namespace gppca {
namespace {

InputSet stack(const InputSet& a, const InputSet& b) {
  if (b.rows() == 0) return a;
  if (a.rows() == 0) return b;
  if (a.cols() != b.cols()) throw std::invalid_argument("input sets differ in dimension");
  InputSet out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace

ChartMap::ChartMap(const GpPrior& prior, const InputSet& anchor, PosteriorMode mode,
                   Chart chart)
    : prior_(prior), anchor_(anchor), mode_(mode), chart_(chart) {
  validate(prior_);
  if (anchor_.rows() == 0) throw std::invalid_argument("anchor set is empty");
  if (mode_ == PosteriorMode::kSparse) validate(InducingSet{anchor_});
  if (chart_ == Chart::kWhitened) {
    const auto llt = cholesky_with_jitter(gram(prior_.kernel, anchor_, anchor_), "K(anchor)");
    factor_ = llt.matrixL();
    prior_white_ = factor_.triangularView<Eigen::Lower>().solve(prior_.mean(anchor_));
  }
}

MomentGaussian ChartMap::posterior(const TaskData& task) const {
  validate(task);
  if (chart_ == Chart::kDirect) {
    if (mode_ == PosteriorMode::kExact) return exact_posterior(prior_, task, anchor_);
    const SparsePosterior sp = variational_posterior(prior_, task, InducingSet{anchor_});
    return {sp.mu_prime, sp.sigma_prime};
  }

  const Eigen::Index m = anchor_.rows();
  if (task.size() == 0) return {prior_white_, Matrix::Identity(m, m)};
  // B = L⁻¹k(Z, Xᵢ) = Φᵀ.
  const Matrix b =
      factor_.triangularView<Eigen::Lower>().solve(gram(prior_.kernel, anchor_, task.inputs));
  Matrix p = Matrix::Identity(m, m);
  p.noalias() += prior_.beta * b * b.transpose();
  const auto llt = cholesky_with_jitter(symmetrize(p), "I + beta Phi^T Phi");
  MomentGaussian out;
  out.mu = prior_white_ + prior_.beta * llt.solve(b * (task.outputs - prior_.mean(task.inputs)));
  out.sigma = inverse_from(llt);
  return out;
}

PredictionBatch ChartMap::predict(const MomentGaussian& g, const InputSet& x_plus) const {
  if (g.dim() != anchor_.rows()) {
    throw std::invalid_argument("Gaussian dimension differs from the anchor size");
  }
  if (chart_ == Chart::kDirect) {
    if (mode_ == PosteriorMode::kExact) return predictive(prior_, g, anchor_, x_plus);
    return sparse_predictive(prior_, SparsePosterior{g.mu, g.sigma}, InducingSet{anchor_},
                             x_plus);
  }
  const Matrix a =
      factor_.triangularView<Eigen::Lower>().solve(gram(prior_.kernel, anchor_, x_plus));
  const Vector centered = g.mu - prior_white_;
  const Matrix sa = g.sigma * a;
  PredictionBatch out{Vector(x_plus.rows()), Vector(x_plus.rows())};
  for (Eigen::Index j = 0; j < x_plus.rows(); ++j) {
    const Vector xj = x_plus.row(j).transpose();
    out.mean(j) = prior_.mean_at(xj) + a.col(j).dot(centered);
    const double v =
        kernel_eval(prior_.kernel, xj, xj) - a.col(j).squaredNorm() + a.col(j).dot(sa.col(j));
    out.variance(j) = clamp_variance(v);
  }
  return out;
}

MomentGaussian ChartMap::to_function_space(const MomentGaussian& g) const {
  if (chart_ == Chart::kDirect) {
    if (mode_ == PosteriorMode::kExact) return g;
    return rho_prime_to_rho(SparsePosterior{g.mu, g.sigma}, InducingSet{anchor_},
                            prior_.kernel);
  }
  const auto l = factor_.triangularView<Eigen::Lower>();
  return {l * g.mu, symmetrize(l * g.sigma * factor_.transpose())};
}

CoordinateSet task_coordinates(std::span<const TaskData> tasks, const ChartMap& map,
                               bool parallel) {
  const auto n = static_cast<Eigen::Index>(tasks.size());
  std::vector<MomentGaussian> posts(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      posts[k] = map.posterior(tasks[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const DecompositionError& e) {
      throw DecompositionError("task " + std::to_string(tasks[k].task_id) + ": " + e.what());
    }
  }
  try {
    return make_coordinate_set(posts, FlatMode::kEFlat);
  } catch (const DecompositionError& e) {
    throw DecompositionError(std::string("natural coordinates of a task posterior: ") +
                             e.what());
  }
}

void rebuild_chart(GpPcaModel& model) {
  model.map = ChartMap(model.prior, model.anchor, model.mode, model.chart);
}

GpPcaModel train(std::span<const TaskData> tasks, const GpPrior& prior, Eigen::Index latent_dim,
                 const TrainOptions& opts, const std::optional<InducingSet>& inducing) {
  const auto n = static_cast<Eigen::Index>(tasks.size());
  if (n < 2) throw std::invalid_argument("training needs at least two tasks");
  if (latent_dim < 0 || latent_dim > n - 1) {
    throw std::invalid_argument("latent dimension must satisfy 0 <= L <= I-1 (L = " +
                                std::to_string(latent_dim) + ", I = " + std::to_string(n) +
                                ")");
  }
  GpPcaModel model;
  model.prior = prior;
  model.mode = opts.mode;
  model.chart = opts.chart;
  model.fit_options = opts.fit;
  if (opts.mode == PosteriorMode::kSparse) {
    if (!inducing) throw std::invalid_argument("sparse mode requires an inducing set");
    model.anchor = inducing->points;
  } else {
    model.anchor = union_inputs(tasks);
    if (model.anchor.rows() == 0) throw std::invalid_argument("all tasks are empty");
  }
  for (const auto& t : tasks) model.task_ids.push_back(t.task_id);
  rebuild_chart(model);

  const CoordinateSet coords = task_coordinates(tasks, model.map, opts.fit.parallel);
  FitResult fitted = fit(coords, latent_dim, opts.fit);
  model.subspace = std::move(fitted.subspace);
  model.weights = std::move(fitted.weights);
  model.objective = fitted.objective;
  model.iterations = fitted.iterations;
  return model;
}

MomentGaussian reconstructed_gaussian(const GpPcaModel& model,
                                      const Eigen::Ref<const Vector>& w) {
  const Vector x = reconstruct(w, model.subspace);
  if (!evaluate_point(FlatMode::kEFlat, x, false).valid) {
    throw ValidityError("reconstructed precision is not positive definite", -1);
  }
  return natural_to_moment(unflatten_natural(x));
}

PredictionBatch predict(const GpPcaModel& model, const Eigen::Ref<const Vector>& w,
                        const InputSet& x_plus) {
  return model.map.predict(reconstructed_gaussian(model, w), x_plus);
}

PredictionBatch predict_task(const GpPcaModel& model, Eigen::Index task_index,
                             const InputSet& x_plus) {
  if (task_index < 0 || task_index >= model.num_tasks()) {
    throw std::out_of_range("task index " + std::to_string(task_index) + " out of range");
  }
  return predict(model, model.weights.row(task_index).transpose(), x_plus);
}

ProjectionResult adapt_new_task(const GpPcaModel& model, const TaskData& fewshot,
                                const FitOptions& opts) {
  if (fewshot.size() == 0) throw std::invalid_argument("few-shot task has no data");
  const std::vector<MomentGaussian> post{model.map.posterior(fewshot)};
  const CoordinateSet coords = make_coordinate_set(post, FlatMode::kEFlat);
  // The offset alone need not be a valid Gaussian, so start from whichever of
  // w = 0 and the training weights fits this task best.
  Vector start = Vector::Zero(model.latent_dim());
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vector& w) {
    const Vector x = reconstruct(w, model.subspace);
    const BatchEvaluation e = evaluate_batch_serial(FlatMode::kEFlat, x, coords.dual,
                                                    coords.dual_potential, false);
    if (e.valid() && e.total() < best) {
      best = e.total();
      start = w;
    }
  };
  consider(Vector::Zero(model.latent_dim()));
  for (Eigen::Index i = 0; i < model.weights.rows(); ++i) consider(model.weights.row(i).transpose());
  return project_point(coords, 0, model.subspace, opts, start);
}

MomentGaussian joint_posterior_moments(const GpPrior& prior, const MomentGaussian& rho,
                                       const InputSet& anchor, const InputSet& x_plus) {
  if (rho.dim() != anchor.rows()) {
    throw std::invalid_argument("rho dimension differs from the anchor size");
  }
  if (x_plus.rows() == 0) return rho;
  const InputSet star = stack(anchor, x_plus);
  const auto llt = cholesky_with_jitter(gram(prior.kernel, anchor, anchor), "K");
  const Matrix k_star = gram(prior.kernel, star, anchor);
  const Matrix a = llt.solve(k_star.transpose()).transpose();  // K∗K⁻¹
  MomentGaussian out;
  out.mu = prior.mean(star) + a * (rho.mu - prior.mean(anchor));
  out.sigma = gram(prior.kernel, star, star) +
              a * (rho.sigma - gram(prior.kernel, anchor, anchor)) * a.transpose();
  out.sigma = symmetrize(out.sigma);
  return out;
}

NaturalCoord joint_posterior_coords(const GpPrior& prior, const MomentGaussian& rho,
                                    const InputSet& anchor, const InputSet& x_plus) {
  return moment_to_natural(joint_posterior_moments(prior, rho, anchor, x_plus));
}

std::string to_string(PosteriorMode mode) {
  return mode == PosteriorMode::kExact ? "exact" : "sparse";
}

std::string to_string(Chart chart) { return chart == Chart::kDirect ? "direct" : "whitened"; }

PosteriorMode parse_posterior_mode(const std::string& s) {
  if (s == "exact") return PosteriorMode::kExact;
  if (s == "sparse") return PosteriorMode::kSparse;
  throw std::invalid_argument("unknown posterior mode '" + s + "' (expected exact|sparse)");
}

Chart parse_chart(const std::string& s) {
  if (s == "direct") return Chart::kDirect;
  if (s == "whitened") return Chart::kWhitened;
  throw std::invalid_argument("unknown chart '" + s + "' (expected direct|whitened)");
}

}  // namespace gppca
