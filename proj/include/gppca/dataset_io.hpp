#pragma once

// A dataset directory holds data.csv (task_id, split, x, y; one row per
// sample, after optional '#' comment lines) and manifest.json (task ids, parameters, and whatever provenance
// the caller adds).

#include <filesystem>
#include <iosfwd>

#include "json.hpp"

#include "gppca/datasets.hpp"

namespace gppca {

void write_dataset_csv(const Dataset& d, std::ostream& out);

nlohmann::json dataset_manifest(const Dataset& d);

/// Writes data.csv and manifest.json; `extra` keys are merged into the
/// manifest, and a string `config_hash` among them is also written as a
/// comment line at the top of data.csv.
void save_dataset(const Dataset& d, const std::filesystem::path& dir,
                  const nlohmann::json& extra = nlohmann::json::object());

/// Throws DataError naming the file and line on malformed input.
Dataset read_dataset(std::istream& csv, const nlohmann::json& manifest);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace gppca
