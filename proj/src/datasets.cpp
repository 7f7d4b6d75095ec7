#include "gppca/datasets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gppca {
namespace {

enum Purpose : std::uint32_t {
  kTrainInputs = 1,
  kTrainNoise,
  kTestInputs,
  kTestNoise,
  kTestLatents,
  kTrainOffsets,
  kTestOffsets,
  kTestAlphas,
};

// Held-out tasks draw from their own index range of each stream.
constexpr std::uint64_t kHeldOut = std::uint64_t{1} << 32;

TaskData artificial_sample(double z, int n, double noise_sd, std::uint64_t seed,
                           std::uint32_t input_purpose, std::uint32_t noise_purpose,
                           std::uint64_t index, int task_id) {
  auto inputs = stream(seed, input_purpose, index);
  auto noise = stream(seed, noise_purpose, index);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, noise_sd);
  TaskData t{InputSet(n, 1), Vector(n), task_id};
  for (int j = 0; j < n; ++j) {
    const double x = unif(inputs);
    t.inputs(j, 0) = x;
    t.outputs(j) = artificial_curve(z, x) + normal(noise);
  }
  return t;
}

TaskSplit artificial_task(double z, const ArtificialConfig& cfg, std::uint64_t index, int id) {
  const double sd = std::sqrt(cfg.noise_variance);
  return {artificial_sample(z, cfg.samples_per_task, sd, cfg.seed, kTrainInputs, kTrainNoise,
                            index, id),
          artificial_sample(z, cfg.test_points, sd, cfg.seed, kTestInputs, kTestNoise, index, id),
          z};
}

VdpState vdp_rhs(double alpha, const VdpState& s) {
  return {s.v, alpha * (1.0 - s.x * s.x) * s.v - s.x};
}

int substeps_per_point(const VdpConfig& cfg) {
  return static_cast<int>(std::lround(cfg.dt / cfg.substep));
}

// Pairs from `count` sequences of one trajectory, each starting at a random
// substep offset.
TaskData vdp_sample(const std::vector<TrajectoryPoint>& traj, const VdpConfig& cfg, int count,
                    std::mt19937_64& rng, int task_id) {
  const int stride = substeps_per_point(cfg);
  const int max_start = static_cast<int>(std::lround(cfg.max_offset / cfg.substep));
  std::uniform_int_distribution<int> start(0, max_start);
  const int per_seq = cfg.points_per_sequence - 1;
  TaskData t{InputSet(count * per_seq, 1), Vector(count * per_seq), task_id};
  std::vector<double> x(static_cast<std::size_t>(cfg.points_per_sequence));
  std::vector<double> times(x.size());
  for (int n = 0; n < count; ++n) {
    const int k0 = start(rng);
    for (int j = 0; j < cfg.points_per_sequence; ++j) {
      const auto& p = traj[static_cast<std::size_t>(k0 + j * stride)];
      x[static_cast<std::size_t>(j)] = p.x;
      times[static_cast<std::size_t>(j)] = p.t;
    }
    const auto pairs = finite_difference_pairs(x, times);
    for (int j = 0; j < per_seq; ++j) {
      t.inputs(n * per_seq + j, 0) = pairs[static_cast<std::size_t>(j)][0];
      t.outputs(n * per_seq + j) = pairs[static_cast<std::size_t>(j)][1];
    }
  }
  return t;
}

TaskSplit vdp_task(double alpha, const VdpConfig& cfg, std::uint64_t index, int id) {
  const int stride = substeps_per_point(cfg);
  const int max_start = static_cast<int>(std::lround(cfg.max_offset / cfg.substep));
  const auto traj = integrate_vdp(alpha, cfg.initial_state, cfg.substep,
                                  max_start + (cfg.points_per_sequence - 1) * stride);
  // Offsets are keyed by the seed alone, so sequence n starts at the same
  // time in every task.
  (void)index;
  auto train_rng = stream(cfg.seed, kTrainOffsets);
  auto test_rng = stream(cfg.seed, kTestOffsets);
  return {vdp_sample(traj, cfg, cfg.sequences_per_task, train_rng, id),
          vdp_sample(traj, cfg, cfg.test_sequences, test_rng, id), alpha};
}

}  // namespace

std::vector<TaskData> Dataset::train_data() const {
  std::vector<TaskData> out;
  out.reserve(train_tasks.size());
  for (const auto& t : train_tasks) out.push_back(t.train);
  return out;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    purpose, static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

void validate(const ArtificialConfig& cfg) {
  if (cfg.num_tasks < 1) throw std::invalid_argument("num_tasks must be >= 1");
  if (cfg.samples_per_task < 1) throw std::invalid_argument("samples_per_task must be >= 1");
  if (!(cfg.noise_variance > 0.0)) throw std::invalid_argument("noise_variance must be > 0");
  if (cfg.test_points < 0) throw std::invalid_argument("test_points must be >= 0");
  if (cfg.num_test_tasks < 0) throw std::invalid_argument("num_test_tasks must be >= 0");
  if (!cfg.latents.empty() && static_cast<int>(cfg.latents.size()) != cfg.num_tasks) {
    throw std::invalid_argument("latents must list one z per task");
  }
}

double artificial_curve(double z, double x) {
  const double a = -x - 1.0;
  return z * std::sin(2.0 * std::numbers::pi * x) + (1.0 - z) * (a * a + 1.0);
}

Dataset gen_artificial(const ArtificialConfig& cfg) {
  validate(cfg);
  Dataset d;
  d.experiment = "artificial";
  for (int i = 0; i < cfg.num_tasks; ++i) {
    double z = 0.0;
    if (!cfg.latents.empty()) {
      z = cfg.latents[static_cast<std::size_t>(i)];
    } else if (cfg.num_tasks > 1) {
      z = static_cast<double>(i) / (cfg.num_tasks - 1);
    }
    d.train_tasks.push_back(artificial_task(z, cfg, static_cast<std::uint64_t>(i), i));
  }
  auto latents = stream(cfg.seed, kTestLatents);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < cfg.num_test_tasks; ++k) {
    const double z = unif(latents);
    d.test_tasks.push_back(
        artificial_task(z, cfg, kHeldOut + static_cast<std::uint64_t>(k), cfg.num_tasks + k));
  }
  return d;
}

std::vector<TrajectoryPoint> integrate_vdp(double alpha, VdpState s, double dt, int steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  std::vector<TrajectoryPoint> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({0.0, s.x, s.v});
  auto shifted = [](const VdpState& a, const VdpState& k, double h) {
    return VdpState{a.x + h * k.x, a.v + h * k.v};
  };
  for (int n = 1; n <= steps; ++n) {
    const VdpState k1 = vdp_rhs(alpha, s);
    const VdpState k2 = vdp_rhs(alpha, shifted(s, k1, dt / 2));
    const VdpState k3 = vdp_rhs(alpha, shifted(s, k2, dt / 2));
    const VdpState k4 = vdp_rhs(alpha, shifted(s, k3, dt));
    s.x += dt / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    s.v += dt / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
    out.push_back({n * dt, s.x, s.v});
  }
  return out;
}

void validate(const VdpConfig& cfg) {
  if (cfg.alphas.empty()) throw std::invalid_argument("alphas must not be empty");
  for (double a : cfg.alphas) {
    if (!(a >= 0.0)) throw std::invalid_argument("alphas must be >= 0");
  }
  if (cfg.sequences_per_task < 1) throw std::invalid_argument("sequences_per_task must be >= 1");
  if (cfg.points_per_sequence < 2) throw std::invalid_argument("points_per_sequence must be >= 2");
  if (!(cfg.dt > 0.0) || !(cfg.substep > 0.0)) {
    throw std::invalid_argument("dt and substep must be > 0");
  }
  const double ratio = cfg.dt / cfg.substep;
  if (std::lround(ratio) < 1 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw std::invalid_argument("dt must be a whole multiple of substep");
  }
  if (!(cfg.max_offset >= 0.0)) throw std::invalid_argument("max_offset must be >= 0");
  if (cfg.test_sequences < 0 || cfg.num_test_tasks < 0) {
    throw std::invalid_argument("test sizes must be >= 0");
  }
  if (!(cfg.test_alpha_range[0] >= 0.0) || cfg.test_alpha_range[1] < cfg.test_alpha_range[0]) {
    throw std::invalid_argument("test_alpha_range must satisfy 0 <= lo <= hi");
  }
}

std::vector<std::array<double, 2>> finite_difference_pairs(const std::vector<double>& x,
                                                           const std::vector<double>& t) {
  if (x.size() != t.size()) throw std::invalid_argument("x and t differ in length");
  std::vector<std::array<double, 2>> out;
  for (std::size_t j = 0; j + 1 < x.size(); ++j) {
    out.push_back({x[j], (x[j + 1] - x[j]) / (t[j + 1] - t[j])});
  }
  return out;
}

Dataset vdp_tasks(const VdpConfig& cfg) {
  validate(cfg);
  Dataset d;
  d.experiment = "vdp";
  const auto n = static_cast<int>(cfg.alphas.size());
  for (int i = 0; i < n; ++i) {
    d.train_tasks.push_back(
        vdp_task(cfg.alphas[static_cast<std::size_t>(i)], cfg, static_cast<std::uint64_t>(i), i));
  }
  auto alphas = stream(cfg.seed, kTestAlphas);
  std::uniform_real_distribution<double> unif(cfg.test_alpha_range[0], cfg.test_alpha_range[1]);
  for (int k = 0; k < cfg.num_test_tasks; ++k) {
    const double a = unif(alphas);
    d.test_tasks.push_back(vdp_task(a, cfg, kHeldOut + static_cast<std::uint64_t>(k), n + k));
  }
  return d;
}

}  // namespace gppca
