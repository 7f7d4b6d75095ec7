#pragma once

// Generators for the two experiment families. Every random draw comes from a
// stream keyed by (seed, purpose, task), so changing one size (say N) leaves
// all other draws untouched.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gppca/kernels.hpp"

namespace gppca {

/// One task with its training and held-out test data. `parameter` is the
/// latent z (artificial) or α (Van der Pol).
struct TaskSplit {
  TaskData train;
  TaskData test;
  double parameter = 0.0;
};

/// Training tasks plus held-out tasks with ids ≥ number of training tasks.
struct Dataset {
  std::string experiment;
  std::vector<TaskSplit> train_tasks;
  std::vector<TaskSplit> test_tasks;

  std::vector<TaskData> train_data() const;
};

/// Deterministic stream for one (seed, purpose, index) triple.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index = 0);

// Artificial tasks: y = z sin(2πx) + (1 − z)((−x − 1)² + 1) + ε, x ~ U(0, 1).

struct ArtificialConfig {
  int num_tasks = 20;
  int samples_per_task = 10;
  double noise_variance = 0.04;
  std::uint64_t seed = 0;
  std::vector<double> latents;  ///< explicit z per task; empty → even grid on [0, 1]
  int test_points = 100;
  int num_test_tasks = 100;
};

void validate(const ArtificialConfig& cfg);

double artificial_curve(double z, double x);

Dataset gen_artificial(const ArtificialConfig& cfg);

// Van der Pol: x'' − α(1 − x²)x' + x = 0.

struct VdpState {
  double x = 0.0;
  double v = 0.0;
};

struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
};

/// Fixed-step RK4; returns steps + 1 points starting at t = 0.
std::vector<TrajectoryPoint> integrate_vdp(double alpha, VdpState state0, double dt, int steps);

struct VdpConfig {
  std::vector<double> alphas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int sequences_per_task = 10;
  int points_per_sequence = 5;
  double dt = 0.1;        ///< spacing of recorded points
  double substep = 0.01;  ///< RK4 step; dt must be a whole multiple
  VdpState initial_state{2.0, 0.0};
  double max_offset = 2.5;  ///< sequences start at t₀ ~ U(0, max_offset) on the substep grid
  std::uint64_t seed = 0;
  int test_sequences = 100;
  int num_test_tasks = 10;
  std::array<double, 2> test_alpha_range{0.1, 1.0};
};

void validate(const VdpConfig& cfg);

/// (xⱼ, (xⱼ₊₁ − xⱼ)/(tⱼ₊₁ − tⱼ)) for consecutive points of one sequence.
std::vector<std::array<double, 2>> finite_difference_pairs(const std::vector<double>& x,
                                                           const std::vector<double>& t);

Dataset vdp_tasks(const VdpConfig& cfg);

}  // namespace gppca
