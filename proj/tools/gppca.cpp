// gppca command-line front end. Exit codes: 0 success, 1 configuration or
// usage error, 2 data or I/O error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "gppca/config.hpp"
#include "gppca/dataset_io.hpp"
#include "gppca/error.hpp"
#include "gppca/evaluation.hpp"
#include "gppca/format.hpp"
#include "gppca/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gppca;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("failed writing " + p.string());
}

std::string csv_comment(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

// "lo:hi:n" → n evenly spaced points.
InputSet parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  double lo = 0, hi = 0, n = 0;
  if (parts.size() != 3 || !parse_double(parts[0], lo) || !parse_double(parts[1], hi) ||
      !parse_double(parts[2], n) || n < 1 || n != static_cast<int>(n)) {
    throw ConfigError("grid must look like lo:hi:n, got '" + text + "'");
  }
  InputSet x(static_cast<Eigen::Index>(n), 1);
  if (n == 1) {
    x(0, 0) = lo;
  } else {
    x.col(0) = Vector::LinSpaced(static_cast<Eigen::Index>(n), lo, hi);
  }
  return x;
}

// Two-column numeric CSV with a header; '#' lines are skipped. One column
// gives inputs only.
std::vector<std::vector<double>> read_numeric_csv(const fs::path& p, std::size_t columns) {
  std::istringstream in(read_file(p));
  std::string line;
  long lineno = 0;
  bool header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) {
      double v = 0;
      if (!parse_double(f, v)) {
        throw DataError(p.string() + " line " + std::to_string(lineno) + ": bad number '" + f + "'");
      }
      row.push_back(v);
    }
    if (row.size() != columns) {
      throw DataError(p.string() + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (!header) throw DataError(p.string() + " has no header");
  return rows;
}

json load_model_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::parse_error& e) {
    throw DataError("model file " + p.string() + " is not valid JSON: " + e.what());
  }
}

std::string provenance_hash(const json& model) {
  if (model.contains("provenance") && model["provenance"].contains("config_hash")) {
    return model["provenance"]["config_hash"].get<std::string>();
  }
  return hash_hex(fnv1a(model.dump()));
}

Eigen::Index task_index(const GpPcaModel& m, int task_id) {
  for (std::size_t i = 0; i < m.task_ids.size(); ++i) {
    if (m.task_ids[i] == task_id) return static_cast<Eigen::Index>(i);
  }
  throw ConfigError("task " + std::to_string(task_id) + " is not in the model");
}

std::string prediction_csv(const InputSet& x, const PredictionBatch& p, const std::string& hash) {
  std::ostringstream out;
  out << csv_comment(hash) << "x,mean,variance\n";
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    out << format_double(x(j, 0)) << ',' << format_double(p.mean(j)) << ','
        << format_double(p.variance(j)) << '\n';
  }
  return out.str();
}

// --- commands -------------------------------------------------------------

struct GenerateArgs {
  std::string experiment, config, out;
};

void cmd_generate(const GenerateArgs& a) {
  ExperimentConfig cfg = config_or_default(a.config);
  const json raw = json::parse(read_file(a.config));
  if (raw.contains("experiment") && raw["experiment"] != a.experiment) {
    throw ConfigError("config experiment '" + raw["experiment"].get<std::string>() +
                      "' differs from --experiment " + a.experiment);
  }
  if (!raw.contains(a.experiment)) {
    throw ConfigError("missing required field '" + a.experiment + "' in " + a.config);
  }
  cfg.experiment = a.experiment;
  const Dataset d = a.experiment == "artificial" ? gen_artificial(cfg.artificial)
                                                 : vdp_tasks(cfg.vdp);
  const std::string hash = hash_hex(config_hash(cfg));
  const std::uint64_t seed = a.experiment == "artificial" ? cfg.artificial.seed : cfg.vdp.seed;
  save_dataset(d, a.out, {{"config_hash", hash}, {"seed", seed}, {"config", config_to_json(cfg)}});
  std::cout << "wrote " << d.train_tasks.size() << " training and " << d.test_tasks.size()
            << " held-out tasks to " << a.out << " (config " << hash << ")\n";
}

struct TrainArgs {
  std::string data, mode = "sparse", chart, config, out;
  long latent_dim = 1;
  int num_inducing = 0;
};

void cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = config_or_default(a.config);
  cfg.mode = parse_posterior_mode(a.mode);
  if (!a.chart.empty()) cfg.chart = parse_chart(a.chart);
  if (a.num_inducing > 0) cfg.num_inducing = a.num_inducing;
  cfg.latent_dim = a.latent_dim;
  const Dataset d = load_dataset(a.data);
  std::optional<InducingSet> inducing;
  if (cfg.mode == PosteriorMode::kSparse) inducing = experiment_inducing(cfg, d);
  const GpPcaModel m =
      train(d.train_data(), cfg.prior, cfg.latent_dim, {cfg.mode, cfg.chart, cfg.fit}, inducing);
  const std::string hash = hash_hex(config_hash(cfg));
  const std::string manifest = read_file(fs::path(a.data) / "manifest.json");
  const std::string csv = read_file(fs::path(a.data) / "data.csv");
  save_model(m, a.out,
             {{"provenance",
               {{"config_hash", hash},
                {"config", config_to_json(cfg)},
                {"dataset_hash", hash_hex(fnv1a(manifest + csv))}}}});
  std::cout << "objective " << format_double(m.objective) << " iterations " << m.iterations
            << " tasks " << m.num_tasks() << " latent_dim " << m.latent_dim() << '\n';
}

struct PredictArgs {
  std::string model, grid, inputs, out;
  int task = 0;
};

void cmd_predict(const PredictArgs& a) {
  const json j = load_model_json(a.model);
  const GpPcaModel m = model_from_json(j);
  InputSet x;
  if (!a.grid.empty()) {
    x = parse_grid(a.grid);
  } else {
    const auto rows = read_numeric_csv(a.inputs, 1);
    x.resize(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = rows[i][0];
  }
  const PredictionBatch p = predict_task(m, task_index(m, a.task), x);
  write_file(a.out, prediction_csv(x, p, provenance_hash(j)));
}

struct AdaptArgs {
  std::string model, data, out;
  int task_id = -1;
};

void cmd_adapt(const AdaptArgs& a) {
  json j = load_model_json(a.model);
  GpPcaModel m = model_from_json(j);
  for (int id : m.task_ids) {
    if (id == a.task_id) throw ConfigError("task id " + std::to_string(a.task_id) + " already in model");
  }
  const auto rows = read_numeric_csv(a.data, 2);
  TaskData t{InputSet(static_cast<Eigen::Index>(rows.size()), 1),
             Vector(static_cast<Eigen::Index>(rows.size())), a.task_id};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.inputs(static_cast<Eigen::Index>(i), 0) = rows[i][0];
    t.outputs(static_cast<Eigen::Index>(i)) = rows[i][1];
  }
  const ProjectionResult r = adapt_new_task(m, t, m.fit_options);
  m.weights.conservativeResize(m.weights.rows() + 1, Eigen::NoChange);
  m.weights.row(m.weights.rows() - 1) = r.weights.transpose();
  m.task_ids.push_back(a.task_id);

  json prov = j.value("provenance", json::object());
  prov["adapted"].push_back({{"task_id", a.task_id},
                             {"source_hash", hash_hex(fnv1a(read_file(a.data)))},
                             {"divergence", r.objective}});
  save_model(m, a.out, {{"provenance", prov}});
  std::cout << "w =";
  for (Eigen::Index k = 0; k < r.weights.size(); ++k) std::cout << ' ' << format_double(r.weights(k));
  std::cout << "\ndivergence " << format_double(r.objective) << " iterations " << r.iterations << '\n';
}

struct EvaluateArgs {
  std::string config, out, timings;
};

void cmd_evaluate(const EvaluateArgs& a, int jobs) {
  const ExperimentConfig cfg = load_config(a.config);
  const std::string hash = hash_hex(config_hash(cfg));
  const ExperimentReport r = run_experiment(cfg, jobs);
  const fs::path dir(a.out);
  std::ostringstream long_csv, task_csv, latent_csv;
  write_long_csv(r, long_csv);
  write_task_csv(r, task_csv);
  write_latent_csv(r, latent_csv);
  write_file(dir / "rmse_long.csv", csv_comment(hash) + long_csv.str());
  write_file(dir / "rmse_tasks.csv", csv_comment(hash) + task_csv.str());
  write_file(dir / "latents.csv", csv_comment(hash) + latent_csv.str());
  json summary = summary_json(r, false);
  summary["config_hash"] = hash;
  summary["config"] = config_to_json(cfg);
  write_file(dir / "summary.json", summary.dump(1) + "\n");
  // Wall-clock times differ between runs, so they stay out of the default outputs.
  const json timing = summary_json(r, true)["timings"];
  if (!a.timings.empty()) write_file(a.timings, timing.dump(1) + "\n");
  for (const auto& row : r.summary()) {
    std::cout << to_string(row.method) << " N=" << row.samples << ' ' << to_string(row.split)
              << " rmse " << format_double(row.mean) << " ± " << format_double(row.stddev) << '\n';
  }
  double total = 0.0;
  for (const auto& t : r.timings) total += t.seconds;
  std::cerr << "fit and prediction time " << total << " s over " << r.timings.size() << " runs\n";
}

struct ExportArgs {
  std::string kind, model, data, report, grid = "0:1:101", out;
};

void cmd_export(const ExportArgs& a) {
  std::ostringstream out;
  if (a.kind == "rmse") {
    const json s = json::parse(read_file(fs::path(a.report) / "summary.json"));
    out << csv_comment(s.at("config_hash").get<std::string>()) << "method,split,N,mean_rmse,std_rmse\n";
    for (const auto& row : s.at("summary")) {
      out << row.at("method").get<std::string>() << ',' << row.at("split").get<std::string>() << ','
          << row.at("N").get<int>() << ',' << format_double(row.at("mean_rmse").get<double>())
          << ',' << format_double(row.at("std_rmse").get<double>()) << '\n';
    }
  } else if (a.kind == "curves" || a.kind == "latent") {
    if (a.model.empty() || a.data.empty()) throw ConfigError("--model and --data are required");
    const json j = load_model_json(a.model);
    const GpPcaModel m = model_from_json(j);
    const Dataset d = load_dataset(a.data);
    std::map<int, const TaskSplit*> by_id;
    for (const auto* list : {&d.train_tasks, &d.test_tasks}) {
      for (const auto& t : *list) by_id[t.train.task_id] = &t;
    }
    out << csv_comment(provenance_hash(j));
    if (a.kind == "curves") {
      const InputSet x = parse_grid(a.grid);
      out << "task_id,parameter,method,x,mean,variance\n";
      for (std::size_t i = 0; i < m.task_ids.size(); ++i) {
        const auto it = by_id.find(m.task_ids[i]);
        if (it == by_id.end()) continue;
        const TaskSplit& t = *it->second;
        const PredictionBatch gp = gp_regression(m.prior, t.train, x);
        const PredictionBatch pca = predict_task(m, static_cast<Eigen::Index>(i), x);
        for (const auto& [name, p] : {std::pair{"gp", &gp}, std::pair{"gp_epca", &pca}}) {
          for (Eigen::Index k = 0; k < x.rows(); ++k) {
            out << t.train.task_id << ',' << format_double(t.parameter) << ',' << name << ','
                << format_double(x(k, 0)) << ',' << format_double(p->mean(k)) << ','
                << format_double(p->variance(k)) << '\n';
          }
        }
      }
    } else {
      out << "task_id,parameter,split";
      for (Eigen::Index k = 1; k <= m.latent_dim(); ++k) out << ",w" << k;
      out << '\n';
      auto row = [&](const TaskSplit& t, const char* split, const Vector& w) {
        out << t.train.task_id << ',' << format_double(t.parameter) << ',' << split;
        for (Eigen::Index k = 0; k < w.size(); ++k) out << ',' << format_double(w(k));
        out << '\n';
      };
      for (std::size_t i = 0; i < m.task_ids.size(); ++i) {
        const auto it = by_id.find(m.task_ids[i]);
        if (it != by_id.end()) {
          row(*it->second, "train", m.weights.row(static_cast<Eigen::Index>(i)).transpose());
        }
      }
      for (const auto& t : d.test_tasks) {
        if (t.train.size() == 0) continue;
        row(t, "test", adapt_new_task(m, t.train, m.fit_options).weights);
      }
    }
  } else {
    throw ConfigError("--kind must be curves, rmse or latent");
  }
  write_file(a.out, out.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PCA over Gaussian-process posteriors"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "generate a dataset");
  g->add_option("--experiment", gen.experiment)->required()->check(CLI::IsMember({"artificial", "vdp"}));
  g->add_option("--config", gen.config)->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out)->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "fit a GP-ePCA model on a dataset's training tasks");
  t->add_option("--data", tr.data)->required()->check(CLI::ExistingDirectory);
  t->add_option("--mode", tr.mode)->check(CLI::IsMember({"exact", "sparse"}));
  t->add_option("--latent-dim", tr.latent_dim)->required();
  t->add_option("--chart", tr.chart)->check(CLI::IsMember({"direct", "whitened"}));
  t->add_option("--num-inducing", tr.num_inducing)->check(CLI::PositiveNumber);
  t->add_option("--config", tr.config)->check(CLI::ExistingFile);
  t->add_option("--out", tr.out)->required();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "predictive mean and variance for one task");
  p->add_option("--model", pr.model)->required()->check(CLI::ExistingFile);
  p->add_option("--task", pr.task, "task id")->required();
  auto* grid = p->add_option("--grid", pr.grid, "lo:hi:n");
  auto* inputs = p->add_option("--inputs", pr.inputs, "CSV with a header and one x column")
                     ->check(CLI::ExistingFile);
  grid->excludes(inputs);
  p->add_option("--out", pr.out)->required();

  AdaptArgs ad;
  auto* a = app.add_subcommand("adapt", "project a few-shot task onto the model's subspace");
  a->add_option("--model", ad.model)->required()->check(CLI::ExistingFile);
  a->add_option("--data", ad.data, "CSV with header x,y")->required()->check(CLI::ExistingFile);
  a->add_option("--task-id", ad.task_id)->required();
  a->add_option("--out", ad.out)->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "run the GP vs GP-ePCA protocol");
  e->add_option("--config", ev.config)->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out)->required();
  e->add_option("--timings", ev.timings, "also write wall-clock timings here");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-plot", "plot-ready tables");
  x->add_option("--kind", ex.kind)->required()->check(CLI::IsMember({"curves", "rmse", "latent"}));
  x->add_option("--model", ex.model)->check(CLI::ExistingFile);
  x->add_option("--data", ex.data)->check(CLI::ExistingDirectory);
  x->add_option("--report", ex.report)->check(CLI::ExistingDirectory);
  x->add_option("--grid", ex.grid, "lo:hi:n");
  x->add_option("--out", ex.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 1;
  }

  try {
    if (jobs > 0) omp_set_num_threads(jobs);
    if (*g) cmd_generate(gen);
    if (*t) cmd_train(tr);
    if (*p) {
      if (pr.grid.empty() && pr.inputs.empty()) throw ConfigError("predict needs --grid or --inputs");
      cmd_predict(pr);
    }
    if (*a) cmd_adapt(ad);
    if (*e) cmd_evaluate(ev, jobs);
    if (*x) cmd_export(ex);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& err) {
    std::cerr << "invalid argument: " << err.what() << '\n';
    return 1;
  } catch (const std::out_of_range& err) {
    std::cerr << "invalid argument: " << err.what() << '\n';
    return 1;
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return 3;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
