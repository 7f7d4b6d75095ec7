#pragma once

// Experiment protocol: plain GP against GP-ePCA on training tasks (each
// task's own test points) and held-out tasks (few-shot training points give
// the posterior or the projected weight; test points give the RMSE).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gppca/datasets.hpp"
#include "gppca/gp_pca.hpp"

namespace gppca {

/// √(mean squared difference). Throws std::invalid_argument on length
/// mismatch or empty input.
double rmse(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& truth);

enum class Method { kGp, kGpPca };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentConfig {
  std::string experiment = "artificial";  ///< "artificial" or "vdp"
  ArtificialConfig artificial;
  VdpConfig vdp;
  std::vector<int> sample_sizes = {10};  ///< N sweep (samples or sequences per task)
  int repetitions = 5;
  std::uint64_t seed = 0;
  std::vector<Method> methods = {Method::kGp, Method::kGpPca};
  GpPrior prior{{KernelKind::kRbf, 0.2}, 25.0, 0.0};
  Eigen::Index latent_dim = 1;
  PosteriorMode mode = PosteriorMode::kSparse;
  Chart chart = Chart::kWhitened;
  Eigen::Index num_inducing = 20;
  std::optional<std::array<double, 2>> inducing_range;  ///< default: span of training inputs
  FitOptions fit;
};

void validate(const ExperimentConfig& cfg);

/// Data seed of repetition r.
std::uint64_t repetition_seed(std::uint64_t seed, int repetition);

/// Dataset for one (N, repetition) cell.
Dataset make_dataset(const ExperimentConfig& cfg, int samples, int repetition);

/// Inducing points used for sparse training on `d`.
InducingSet experiment_inducing(const ExperimentConfig& cfg, const Dataset& d);

/// FNV-1a over every test split's inputs and outputs.
std::uint64_t test_split_hash(const Dataset& d);

enum class Split { kTrain, kTest };
std::string to_string(Split s);

struct TaskScore {
  int task_id = 0;
  double parameter = 0.0;
  double rmse = 0.0;
};

struct CellResult {
  Method method = Method::kGp;
  int samples = 0;
  int repetition = 0;
  Split split = Split::kTrain;
  double rmse = 0.0;  ///< mean of per-task RMSEs
  std::uint64_t test_hash = 0;
  std::vector<TaskScore> tasks;
};

/// Weight vectors of one trained GP-ePCA model.
struct LatentRecord {
  int samples = 0;
  int repetition = 0;
  Split split = Split::kTrain;
  int task_id = 0;
  double parameter = 0.0;
  Vector weights;
};

struct Timing {
  Method method = Method::kGp;
  int samples = 0;
  int repetition = 0;
  double seconds = 0.0;
};

struct SummaryRow {
  Method method = Method::kGp;
  int samples = 0;
  Split split = Split::kTrain;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample std over repetitions, 0 when T = 1
  int repetitions = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<CellResult> cells;  ///< sorted by (method, N, repetition, split)
  std::vector<LatentRecord> latents;
  std::vector<Timing> timings;

  std::vector<SummaryRow> summary() const;
};

/// Runs every (N, repetition) cell, in parallel over cells with `jobs`
/// threads (0 = OpenMP default). Output does not depend on `jobs`.
ExperimentReport run_experiment(const ExperimentConfig& cfg, int jobs = 0);

/// method,N,repetition,split,rmse
void write_long_csv(const ExperimentReport& r, std::ostream& out);
/// method,N,repetition,split,task_id,parameter,rmse
void write_task_csv(const ExperimentReport& r, std::ostream& out);
/// N,repetition,split,task_id,parameter,w1..wL
void write_latent_csv(const ExperimentReport& r, std::ostream& out);
/// Summary rows, per-cell test hashes and timings. Timings vary between runs,
/// so they are omitted when `with_timings` is false.
nlohmann::json summary_json(const ExperimentReport& r, bool with_timings);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gppca
