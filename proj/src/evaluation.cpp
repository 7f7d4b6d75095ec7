#include "gppca/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include <omp.h>

#include "gppca/error.hpp"
#include "gppca/format.hpp"

namespace gppca {
namespace {

using nlohmann::json;

struct CellOutput {
  std::vector<CellResult> cells;
  std::vector<LatentRecord> latents;
  std::vector<Timing> timings;
};

template <typename Predict>
CellResult score(Method m, int samples, int rep, Split split, std::uint64_t hash,
                 const std::vector<TaskSplit>& tasks, Predict&& predict) {
  CellResult c{m, samples, rep, split, 0.0, hash, {}};
  double sum = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TaskSplit& t = tasks[i];
    const PredictionBatch p = predict(i, t);
    const double e = rmse(p.mean, t.test.outputs);
    c.tasks.push_back({t.train.task_id, t.parameter, e});
    sum += e;
  }
  c.rmse = sum / static_cast<double>(tasks.size());
  return c;
}

CellOutput run_cell(const ExperimentConfig& cfg, int samples, int rep) {
  CellOutput out;
  const Dataset d = make_dataset(cfg, samples, rep);
  const std::uint64_t hash = test_split_hash(d);
  for (Method m : cfg.methods) {
    const auto start = std::chrono::steady_clock::now();
    if (m == Method::kGp) {
      auto gp = [&](std::size_t, const TaskSplit& t) {
        return gp_regression(cfg.prior, t.train, t.test.inputs);
      };
      out.cells.push_back(score(m, samples, rep, Split::kTrain, hash, d.train_tasks, gp));
      if (!d.test_tasks.empty()) {
        out.cells.push_back(score(m, samples, rep, Split::kTest, hash, d.test_tasks, gp));
      }
    } else {
      const std::vector<TaskData> train_data = d.train_data();
      std::optional<InducingSet> inducing;
      if (cfg.mode == PosteriorMode::kSparse) inducing = experiment_inducing(cfg, d);
      const GpPcaModel model =
          train(train_data, cfg.prior, cfg.latent_dim, {cfg.mode, cfg.chart, cfg.fit}, inducing);
      out.cells.push_back(score(m, samples, rep, Split::kTrain, hash, d.train_tasks,
                                [&](std::size_t i, const TaskSplit& t) {
                                  return predict_task(model, static_cast<Eigen::Index>(i),
                                                      t.test.inputs);
                                }));
      for (std::size_t i = 0; i < d.train_tasks.size(); ++i) {
        const auto& t = d.train_tasks[i];
        out.latents.push_back({samples, rep, Split::kTrain, t.train.task_id, t.parameter,
                               model.weights.row(static_cast<Eigen::Index>(i)).transpose()});
      }
      if (!d.test_tasks.empty()) {
        std::vector<Vector> adapted(d.test_tasks.size());
        out.cells.push_back(score(m, samples, rep, Split::kTest, hash, d.test_tasks,
                                  [&](std::size_t i, const TaskSplit& t) {
                                    adapted[i] = adapt_new_task(model, t.train, cfg.fit).weights;
                                    return predict(model, adapted[i], t.test.inputs);
                                  }));
        for (std::size_t i = 0; i < d.test_tasks.size(); ++i) {
          const auto& t = d.test_tasks[i];
          out.latents.push_back(
              {samples, rep, Split::kTest, t.train.task_id, t.parameter, adapted[i]});
        }
      }
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    out.timings.push_back({m, samples, rep, dt.count()});
  }
  return out;
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= p[k];
    h *= 0x100000001b3ULL;
  }
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double rmse(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("rmse: length mismatch (" + std::to_string(predicted.size()) +
                                " vs " + std::to_string(truth.size()) + ")");
  }
  if (truth.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(truth.size()));
}

std::string to_string(Method m) { return m == Method::kGp ? "gp" : "gp_epca"; }

Method parse_method(const std::string& s) {
  if (s == "gp") return Method::kGp;
  if (s == "gp_epca") return Method::kGpPca;
  throw std::invalid_argument("unknown method '" + s + "' (expected gp|gp_epca)");
}

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

void validate(const ExperimentConfig& cfg) {
  if (cfg.experiment != "artificial" && cfg.experiment != "vdp") {
    throw std::invalid_argument("experiment must be artificial or vdp");
  }
  if (cfg.sample_sizes.empty()) throw std::invalid_argument("sample_sizes must not be empty");
  for (int n : cfg.sample_sizes) {
    if (n < 1) throw std::invalid_argument("sample sizes must be >= 1");
  }
  if (cfg.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (cfg.methods.empty()) throw std::invalid_argument("methods must not be empty");
  validate(cfg.prior);
  validate(cfg.fit);
  if (cfg.latent_dim < 0) throw std::invalid_argument("latent_dim must be >= 0");
  if (cfg.num_inducing < 1) throw std::invalid_argument("num_inducing must be >= 1");
  if (cfg.inducing_range && !((*cfg.inducing_range)[0] < (*cfg.inducing_range)[1])) {
    throw std::invalid_argument("inducing_range must satisfy lo < hi");
  }
  if (cfg.experiment == "artificial") {
    validate(cfg.artificial);
  } else {
    validate(cfg.vdp);
  }
}

std::uint64_t repetition_seed(std::uint64_t seed, int repetition) {
  auto rng = stream(seed, 0x52455053u, static_cast<std::uint64_t>(repetition));
  return rng();
}

Dataset make_dataset(const ExperimentConfig& cfg, int samples, int repetition) {
  if (cfg.experiment == "artificial") {
    ArtificialConfig a = cfg.artificial;
    a.samples_per_task = samples;
    a.seed = repetition_seed(cfg.seed, repetition);
    return gen_artificial(a);
  }
  VdpConfig v = cfg.vdp;
  v.sequences_per_task = samples;
  v.seed = repetition_seed(cfg.seed, repetition);
  return vdp_tasks(v);
}

InducingSet experiment_inducing(const ExperimentConfig& cfg, const Dataset& d) {
  if (cfg.inducing_range) {
    InputSet ends(2, 1);
    ends << (*cfg.inducing_range)[0], (*cfg.inducing_range)[1];
    return grid_inducing(ends, cfg.num_inducing);
  }
  return grid_inducing(union_inputs(d.train_data()), cfg.num_inducing);
}

std::uint64_t test_split_hash(const Dataset& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* list : {&d.train_tasks, &d.test_tasks}) {
    for (const auto& t : *list) {
      fnv(h, &t.test.task_id, sizeof t.test.task_id);
      fnv(h, t.test.inputs.data(), sizeof(double) * static_cast<std::size_t>(t.test.inputs.size()));
      fnv(h, t.test.outputs.data(),
          sizeof(double) * static_cast<std::size_t>(t.test.outputs.size()));
    }
  }
  return h;
}

std::vector<SummaryRow> ExperimentReport::summary() const {
  std::vector<SummaryRow> out;
  for (std::size_t i = 0; i < cells.size();) {
    const CellResult& c = cells[i];
    std::size_t j = i;
    while (j < cells.size() && cells[j].method == c.method && cells[j].samples == c.samples) ++j;
    for (Split s : {Split::kTrain, Split::kTest}) {
      std::vector<double> v;
      for (std::size_t k = i; k < j; ++k) {
        if (cells[k].split == s) v.push_back(cells[k].rmse);
      }
      if (v.empty()) continue;
      const double n = static_cast<double>(v.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      out.push_back({c.method, c.samples, s, mean, sd, static_cast<int>(v.size())});
    }
    i = j;
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, int jobs) {
  validate(cfg);
  struct Job {
    int samples;
    int rep;
  };
  std::vector<Job> list;
  for (int n : cfg.sample_sizes) {
    for (int r = 0; r < cfg.repetitions; ++r) list.push_back({n, r});
  }
  std::vector<CellOutput> outputs(list.size());
  std::vector<std::exception_ptr> errors(list.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
  const auto count = static_cast<long>(list.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long k = 0; k < count; ++k) {
    const auto u = static_cast<std::size_t>(k);
    try {
      outputs[u] = run_cell(cfg, list[u].samples, list[u].rep);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k]) continue;
    const std::string where = "N=" + std::to_string(list[k].samples) + " repetition " +
                              std::to_string(list[k].rep) + ": ";
    try {
      std::rethrow_exception(errors[k]);
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }

  ExperimentReport rep;
  rep.config = cfg;
  for (auto& o : outputs) {
    for (auto& c : o.cells) rep.cells.push_back(std::move(c));
    for (auto& l : o.latents) rep.latents.push_back(std::move(l));
    for (auto& t : o.timings) rep.timings.push_back(t);
  }
  std::stable_sort(rep.cells.begin(), rep.cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.samples, a.repetition, a.split) <
           std::tie(b.method, b.samples, b.repetition, b.split);
  });
  return rep;
}

void write_long_csv(const ExperimentReport& r, std::ostream& out) {
  out << "method,N,repetition,split,rmse\n";
  for (const auto& c : r.cells) {
    out << to_string(c.method) << ',' << c.samples << ',' << c.repetition << ','
        << to_string(c.split) << ',' << format_double(c.rmse) << '\n';
  }
}

void write_task_csv(const ExperimentReport& r, std::ostream& out) {
  out << "method,N,repetition,split,task_id,parameter,rmse\n";
  for (const auto& c : r.cells) {
    for (const auto& t : c.tasks) {
      out << to_string(c.method) << ',' << c.samples << ',' << c.repetition << ','
          << to_string(c.split) << ',' << t.task_id << ',' << format_double(t.parameter) << ','
          << format_double(t.rmse) << '\n';
    }
  }
}

void write_latent_csv(const ExperimentReport& r, std::ostream& out) {
  const Eigen::Index l = r.latents.empty() ? r.config.latent_dim : r.latents.front().weights.size();
  out << "N,repetition,split,task_id,parameter";
  for (Eigen::Index k = 1; k <= l; ++k) out << ",w" << k;
  out << '\n';
  for (const auto& rec : r.latents) {
    out << rec.samples << ',' << rec.repetition << ',' << to_string(rec.split) << ','
        << rec.task_id << ',' << format_double(rec.parameter);
    for (Eigen::Index k = 0; k < rec.weights.size(); ++k) out << ',' << format_double(rec.weights(k));
    out << '\n';
  }
}

json summary_json(const ExperimentReport& r, bool with_timings) {
  json rows = json::array();
  for (const auto& s : r.summary()) {
    rows.push_back({{"method", to_string(s.method)},
                    {"N", s.samples},
                    {"split", to_string(s.split)},
                    {"mean_rmse", s.mean},
                    {"std_rmse", s.stddev},
                    {"repetitions", s.repetitions}});
  }
  json hashes = json::array();
  for (const auto& c : r.cells) {
    hashes.push_back({{"method", to_string(c.method)},
                      {"N", c.samples},
                      {"repetition", c.repetition},
                      {"split", to_string(c.split)},
                      {"test_hash", hash_hex(c.test_hash)}});
  }
  json out = {{"experiment", r.config.experiment},
              {"repetitions", r.config.repetitions},
              {"summary", rows},
              {"cells", hashes}};
  if (with_timings) {
    json t = json::array();
    for (const auto& tm : r.timings) {
      t.push_back({{"method", to_string(tm.method)},
                   {"N", tm.samples},
                   {"repetition", tm.repetition},
                   {"seconds", tm.seconds}});
    }
    out["timings"] = t;
  }
  return out;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman needs two equal-length lists of at least 2 values");
  }
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace gppca
