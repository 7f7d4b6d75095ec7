#include "gppca/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gppca/error.hpp"
#include "gppca/format.hpp"

namespace gppca {
namespace {

using nlohmann::json;

void write_rows(const TaskData& t, const char* split, std::ostream& out) {
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    out << t.task_id << ',' << split;
    for (Eigen::Index k = 0; k < t.inputs.cols(); ++k) out << ',' << format_double(t.inputs(j, k));
    out << ',' << format_double(t.outputs(j)) << '\n';
  }
}

json task_list(const std::vector<TaskSplit>& tasks) {
  json out = json::array();
  for (const auto& t : tasks) out.push_back({{"id", t.train.task_id}, {"parameter", t.parameter}});
  return out;
}

Eigen::Index input_dim(const Dataset& d) {
  for (const auto* list : {&d.train_tasks, &d.test_tasks}) {
    for (const auto& t : *list) {
      if (t.train.inputs.cols() > 0) return t.train.inputs.cols();
      if (t.test.inputs.cols() > 0) return t.test.inputs.cols();
    }
  }
  return 1;
}

struct Rows {
  std::vector<double> x;  // row-major
  std::vector<double> y;
};

TaskData to_task(const Rows& r, Eigen::Index dim, int id) {
  const auto n = static_cast<Eigen::Index>(r.y.size());
  TaskData t{InputSet(n, dim), Vector(n), id};
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < dim; ++k) t.inputs(j, k) = r.x[static_cast<std::size_t>(j * dim + k)];
    t.outputs(j) = r.y[static_cast<std::size_t>(j)];
  }
  return t;
}

}  // namespace

void write_dataset_csv(const Dataset& d, std::ostream& out) {
  const Eigen::Index dim = input_dim(d);
  out << "task_id,split";
  if (dim == 1) {
    out << ",x";
  } else {
    for (Eigen::Index k = 0; k < dim; ++k) out << ",x" << k;
  }
  out << ",y\n";
  for (const auto* list : {&d.train_tasks, &d.test_tasks}) {
    for (const auto& t : *list) {
      write_rows(t.train, "train", out);
      write_rows(t.test, "test", out);
    }
  }
}

json dataset_manifest(const Dataset& d) {
  return {{"experiment", d.experiment},
          {"input_dim", input_dim(d)},
          {"train_tasks", task_list(d.train_tasks)},
          {"test_tasks", task_list(d.test_tasks)}};
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir, const json& extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "data.csv");
    if (!out) throw DataError("cannot write " + (dir / "data.csv").string());
    if (extra.contains("config_hash")) {
      out << "# config_hash=" << extra["config_hash"].get<std::string>() << '\n';
    }
    write_dataset_csv(d, out);
    if (!out) throw DataError("failed writing " + (dir / "data.csv").string());
  }
  json manifest = dataset_manifest(d);
  manifest.update(extra);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << '\n';
  if (!out) throw DataError("failed writing " + (dir / "manifest.json").string());
}

Dataset read_dataset(std::istream& csv, const json& manifest) {
  Dataset d;
  Eigen::Index dim = 1;
  std::vector<std::pair<int, double>> train_ids, test_ids;
  try {
    d.experiment = manifest.at("experiment").get<std::string>();
    dim = manifest.at("input_dim").get<Eigen::Index>();
    for (const auto& t : manifest.at("train_tasks")) {
      train_ids.emplace_back(t.at("id").get<int>(), t.at("parameter").get<double>());
    }
    for (const auto& t : manifest.at("test_tasks")) {
      test_ids.emplace_back(t.at("id").get<int>(), t.at("parameter").get<double>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (dim < 1) throw DataError("manifest: input_dim must be >= 1");

  std::map<int, std::pair<Rows, Rows>> rows;  // train, test
  for (const auto& [id, p] : train_ids) rows[id];
  for (const auto& [id, p] : test_ids) rows[id];

  std::string line;
  long lineno = 0;
  auto fail = [&](const std::string& what) {
    throw DataError("data.csv line " + std::to_string(lineno) + ": " + what);
  };
  // Leading '#' lines carry provenance.
  do {
    if (!std::getline(csv, line)) throw DataError("data.csv has no header");
    ++lineno;
  } while (!line.empty() && line[0] == '#');
  if (line.rfind("task_id,split,", 0) != 0) fail("unexpected header '" + line + "'");
  std::vector<std::string> fields;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty()) continue;
    fields.clear();
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (static_cast<Eigen::Index>(fields.size()) != dim + 3) {
      fail("expected " + std::to_string(dim + 3) + " fields, got " +
           std::to_string(fields.size()));
    }
    double id_value = 0.0;
    if (!parse_double(fields[0], id_value) || id_value != static_cast<int>(id_value)) {
      fail("bad task_id '" + fields[0] + "'");
    }
    const auto it = rows.find(static_cast<int>(id_value));
    if (it == rows.end()) fail("task " + fields[0] + " is not in the manifest");
    Rows* target = nullptr;
    if (fields[1] == "train") {
      target = &it->second.first;
    } else if (fields[1] == "test") {
      target = &it->second.second;
    } else {
      fail("split must be train or test, got '" + fields[1] + "'");
    }
    for (std::size_t k = 2; k < fields.size(); ++k) {
      double v = 0.0;
      if (!parse_double(fields[k], v) || !std::isfinite(v)) fail("bad number '" + fields[k] + "'");
      if (k + 1 < fields.size()) {
        target->x.push_back(v);
      } else {
        target->y.push_back(v);
      }
    }
  }
  auto build = [&](const std::vector<std::pair<int, double>>& ids, std::vector<TaskSplit>& out) {
    for (const auto& [id, p] : ids) {
      const auto& r = rows.at(id);
      out.push_back({to_task(r.first, dim, id), to_task(r.second, dim, id), p});
    }
  };
  build(train_ids, d.train_tasks);
  build(test_ids, d.test_tasks);
  return d;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw DataError("cannot read " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  std::ifstream csv(dir / "data.csv");
  if (!csv) throw DataError("cannot read " + (dir / "data.csv").string());
  return read_dataset(csv, manifest);
}

}  // namespace gppca
