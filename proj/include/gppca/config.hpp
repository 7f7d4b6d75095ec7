#pragma once

// JSON run configuration. Every section is optional and falls back to the
// defaults below; unknown keys and wrongly typed values are errors naming the
// offending path. Example:
//
//   {
//     "experiment": "artificial",
//     "artificial": {"seed": 1, "num_tasks": 20, "samples_per_task": 10},
//     "model": {"lengthscale": 0.2, "noise_variance": 0.04, "latent_dim": 1,
//               "mode": "sparse", "num_inducing": 20},
//     "fit": {"method": "lbfgs", "max_iters": 10000, "rel_tol": 1e-8},
//     "evaluation": {"sample_sizes": [2, 5, 10, 20], "repetitions": 5, "seed": 0}
//   }
//
// Sections and keys:
//   experiment   "artificial" | "vdp"
//   artificial   seed (required when present), num_tasks, samples_per_task,
//                noise_variance, latents, test_points, num_test_tasks
//   vdp          seed (required when present), alphas, sequences_per_task,
//                points_per_sequence, dt, substep, initial_state [x, v],
//                max_offset, test_sequences, num_test_tasks, test_alpha_range
//   model        lengthscale, noise_variance, prior_mean, latent_dim, mode,
//                chart, num_inducing, inducing_range [lo, hi]
//   fit          method, learning_rate, max_iters, rel_tol, seed,
//                backtrack_factor, max_backtracks
//   evaluation   sample_sizes, repetitions, seed, methods

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "gppca/evaluation.hpp"

namespace gppca {

/// Throws ConfigError on unknown keys, wrong types, missing required fields
/// or out-of-range values.
ExperimentConfig parse_config(const nlohmann::json& j);

/// Throws ConfigError for unreadable or syntactically invalid files (the
/// message carries the parser's line and column).
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration, defaults included, with sorted keys.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of the compact dump of config_to_json.
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace gppca
