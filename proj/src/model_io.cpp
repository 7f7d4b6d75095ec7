#include "gppca/model_io.hpp"

#include <fstream>

#include "gppca/error.hpp"

namespace gppca {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Eigen::Index cols_if_empty) {
  if (!j.is_array()) throw DataError("expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows == 0 ? cols_if_empty : static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError("ragged matrix in model file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw DataError("expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json model_to_json(const GpPcaModel& model) {
  json j;
  j["version"] = kModelVersion;
  j["mode"] = to_string(model.mode);
  j["chart"] = to_string(model.chart);
  j["kernel"] = {{"kind", "rbf"}, {"lengthscale", model.prior.kernel.lengthscale}};
  j["beta"] = model.prior.beta;
  j["prior_mean_constant"] = model.prior.mean_constant;
  j["latent_dim"] = model.latent_dim();
  j["anchor"] = matrix_to_json(model.anchor);
  j["u0"] = vector_to_json(model.subspace.offset);
  // Basis stored as L rows of length D.
  j["basis"] = matrix_to_json(model.subspace.basis.transpose());
  j["weights"] = matrix_to_json(model.weights);
  j["task_ids"] = model.task_ids;
  j["objective"] = model.objective;
  j["iterations"] = model.iterations;
  const FitOptions& f = model.fit_options;
  j["fit"] = {{"method", to_string(f.method)},
              {"learning_rate", f.learning_rate},     {"max_iters", f.max_iters},
              {"rel_tol", f.rel_tol},                 {"seed", f.seed},
              {"backtrack_factor", f.backtrack_factor}, {"max_backtracks", f.max_backtracks}};
  return j;
}

GpPcaModel model_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion) {
      throw DataError("unsupported model version " + j.at("version").dump());
    }
    GpPcaModel m;
    m.mode = parse_posterior_mode(j.at("mode").get<std::string>());
    m.chart = parse_chart(j.at("chart").get<std::string>());
    if (j.at("kernel").at("kind").get<std::string>() != "rbf") {
      throw DataError("unsupported kernel kind");
    }
    m.prior.kernel.lengthscale = j.at("kernel").at("lengthscale").get<double>();
    m.prior.beta = j.at("beta").get<double>();
    m.prior.mean_constant = j.at("prior_mean_constant").get<double>();
    const auto l = j.at("latent_dim").get<Eigen::Index>();
    m.anchor = matrix_from_json(j.at("anchor"), 1);
    m.subspace.mode = FlatMode::kEFlat;
    m.subspace.offset = vector_from_json(j.at("u0"));
    m.subspace.basis = matrix_from_json(j.at("basis"), m.subspace.offset.size()).transpose();
    if (l == 0) m.subspace.basis.resize(m.subspace.offset.size(), 0);
    m.weights = matrix_from_json(j.at("weights"), l);
    m.task_ids = j.at("task_ids").get<std::vector<int>>();
    m.objective = j.at("objective").get<double>();
    m.iterations = j.at("iterations").get<int>();
    const json& f = j.at("fit");
    m.fit_options.method = parse_fit_method(f.at("method").get<std::string>());
    m.fit_options.learning_rate = f.at("learning_rate").get<double>();
    m.fit_options.max_iters = f.at("max_iters").get<int>();
    m.fit_options.rel_tol = f.at("rel_tol").get<double>();
    m.fit_options.seed = f.at("seed").get<std::uint64_t>();
    m.fit_options.backtrack_factor = f.at("backtrack_factor").get<double>();
    m.fit_options.max_backtracks = f.at("max_backtracks").get<int>();

    if (m.subspace.basis.rows() != m.subspace.offset.size() || m.subspace.latent_dim() != l ||
        m.weights.cols() != l ||
        coordinate_length(m.anchor.rows()) != m.subspace.offset.size()) {
      throw DataError("model arrays have inconsistent shapes");
    }
    rebuild_chart(m);
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const GpPcaModel& model, const std::filesystem::path& path, const json& extra) {
  json j = model_to_json(model);
  j.update(extra);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DataError("failed writing model file " + path.string());
}

GpPcaModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace gppca
