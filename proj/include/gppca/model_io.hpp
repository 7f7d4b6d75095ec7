#pragma once

// Versioned JSON model files. Doubles are written as shortest round-trip
// decimals, so save → load reproduces every field bit for bit.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "gppca/gp_pca.hpp"

namespace gppca {

inline constexpr int kModelVersion = 1;

nlohmann::json model_to_json(const GpPcaModel& model);
/// Throws DataError on missing or malformed fields.
GpPcaModel model_from_json(const nlohmann::json& j);

/// `extra` keys (e.g. provenance) are merged into the top-level object.
void save_model(const GpPcaModel& model, const std::filesystem::path& path,
                const nlohmann::json& extra = nlohmann::json::object());
GpPcaModel load_model(const std::filesystem::path& path);

/// Row-major nested arrays.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index cols_if_empty);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace gppca
