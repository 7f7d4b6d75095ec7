#include "gppca/config.hpp"

#include <fstream>
#include <set>

#include "gppca/error.hpp"

namespace gppca {
namespace {

using nlohmann::json;

// Reads the keys of one JSON object, remembering which were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void require(const char* key) const {
    if (!has(key)) throw ConfigError("missing required field '" + path_ + key + "'");
  }

  void get(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, Eigen::Index& out) {
    int v = static_cast<int>(out);
    get(key, v);
    out = v;
  }
  void get(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "an array of numbers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }
  void get(const char* key, std::vector<int>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(key, "an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  void get(const char* key, std::vector<std::string>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) fail(key, "an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }
  bool get_pair(const char* key, std::array<double, 2>& out) {
    std::vector<double> v;
    get(key, v);
    if (!has(key)) return false;
    if (v.size() != 2) fail(key, "an array of two numbers");
    out = {v[0], v[1]};
    return true;
  }

  /// Parses a string field with `parse`, turning its invalid_argument into a
  /// ConfigError for this path.
  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse&& parse) {
    std::string s;
    get(key, s);
    if (!has(key)) return;
    try {
      out = parse(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path_ + key + ": " + e.what());
    }
  }

  Section child(const char* key) {
    const json* v = take(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, path_ + key + ".");
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path_ + k + "'");
    }
  }

 private:
  const json* take(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError(path_ + key + ": expected " + expected);
  }

  std::string where() const { return path_.empty() ? "config: " : path_ + " "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  Section root(j, "");
  root.get("experiment", cfg.experiment);

  if (root.has("artificial")) {
    Section a = root.child("artificial");
    a.require("seed");
    ArtificialConfig& c = cfg.artificial;
    a.get("seed", c.seed);
    a.get("num_tasks", c.num_tasks);
    a.get("samples_per_task", c.samples_per_task);
    a.get("noise_variance", c.noise_variance);
    a.get("latents", c.latents);
    a.get("test_points", c.test_points);
    a.get("num_test_tasks", c.num_test_tasks);
    a.finish();
  }
  if (root.has("vdp")) {
    Section v = root.child("vdp");
    v.require("seed");
    VdpConfig& c = cfg.vdp;
    v.get("seed", c.seed);
    v.get("alphas", c.alphas);
    v.get("sequences_per_task", c.sequences_per_task);
    v.get("points_per_sequence", c.points_per_sequence);
    v.get("dt", c.dt);
    v.get("substep", c.substep);
    std::array<double, 2> state{c.initial_state.x, c.initial_state.v};
    if (v.get_pair("initial_state", state)) c.initial_state = {state[0], state[1]};
    v.get("max_offset", c.max_offset);
    v.get("test_sequences", c.test_sequences);
    v.get("num_test_tasks", c.num_test_tasks);
    v.get_pair("test_alpha_range", c.test_alpha_range);
    v.finish();
  }
  {
    Section m = root.child("model");
    m.get("lengthscale", cfg.prior.kernel.lengthscale);
    double noise = 1.0 / cfg.prior.beta;
    m.get("noise_variance", noise);
    if (!(noise > 0.0)) throw ConfigError("model.noise_variance must be > 0");
    cfg.prior.beta = 1.0 / noise;
    m.get("prior_mean", cfg.prior.mean_constant);
    m.get("latent_dim", cfg.latent_dim);
    m.get_enum("mode", cfg.mode, parse_posterior_mode);
    m.get_enum("chart", cfg.chart, parse_chart);
    m.get("num_inducing", cfg.num_inducing);
    std::array<double, 2> range{};
    if (m.get_pair("inducing_range", range)) cfg.inducing_range = range;
    m.finish();
  }
  {
    Section f = root.child("fit");
    f.get_enum("method", cfg.fit.method, parse_fit_method);
    f.get("learning_rate", cfg.fit.learning_rate);
    f.get("max_iters", cfg.fit.max_iters);
    f.get("rel_tol", cfg.fit.rel_tol);
    f.get("seed", cfg.fit.seed);
    f.get("backtrack_factor", cfg.fit.backtrack_factor);
    f.get("max_backtracks", cfg.fit.max_backtracks);
    f.finish();
  }
  {
    Section e = root.child("evaluation");
    e.get("sample_sizes", cfg.sample_sizes);
    e.get("repetitions", cfg.repetitions);
    e.get("seed", cfg.seed);
    if (e.has("methods")) {
      std::vector<std::string> names;
      e.get("methods", names);
      cfg.methods.clear();
      for (const auto& n : names) {
        try {
          cfg.methods.push_back(parse_method(n));
        } catch (const std::invalid_argument& ex) {
          throw ConfigError(std::string("evaluation.methods: ") + ex.what());
        }
      }
    }
    e.finish();
  }
  root.finish();

  try {
    validate(cfg);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("invalid configuration: ") + ex.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json config_to_json(const ExperimentConfig& cfg) {
  const ArtificialConfig& a = cfg.artificial;
  const VdpConfig& v = cfg.vdp;
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  json model = {{"lengthscale", cfg.prior.kernel.lengthscale},
                {"noise_variance", 1.0 / cfg.prior.beta},
                {"prior_mean", cfg.prior.mean_constant},
                {"latent_dim", cfg.latent_dim},
                {"mode", to_string(cfg.mode)},
                {"chart", to_string(cfg.chart)},
                {"num_inducing", cfg.num_inducing}};
  if (cfg.inducing_range) {
    model["inducing_range"] = {(*cfg.inducing_range)[0], (*cfg.inducing_range)[1]};
  }
  return {
      {"experiment", cfg.experiment},
      {"artificial",
       {{"seed", a.seed},
        {"num_tasks", a.num_tasks},
        {"samples_per_task", a.samples_per_task},
        {"noise_variance", a.noise_variance},
        {"latents", a.latents},
        {"test_points", a.test_points},
        {"num_test_tasks", a.num_test_tasks}}},
      {"vdp",
       {{"seed", v.seed},
        {"alphas", v.alphas},
        {"sequences_per_task", v.sequences_per_task},
        {"points_per_sequence", v.points_per_sequence},
        {"dt", v.dt},
        {"substep", v.substep},
        {"initial_state", {v.initial_state.x, v.initial_state.v}},
        {"max_offset", v.max_offset},
        {"test_sequences", v.test_sequences},
        {"num_test_tasks", v.num_test_tasks},
        {"test_alpha_range", {v.test_alpha_range[0], v.test_alpha_range[1]}}}},
      {"model", model},
      {"fit",
       {{"method", to_string(cfg.fit.method)},
        {"learning_rate", cfg.fit.learning_rate},
        {"max_iters", cfg.fit.max_iters},
        {"rel_tol", cfg.fit.rel_tol},
        {"seed", cfg.fit.seed},
        {"backtrack_factor", cfg.fit.backtrack_factor},
        {"max_backtracks", cfg.fit.max_backtracks}}},
      {"evaluation",
       {{"sample_sizes", cfg.sample_sizes},
        {"repetitions", cfg.repetitions},
        {"seed", cfg.seed},
        {"methods", methods}}}};
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(config_to_json(cfg).dump()); }

}  // namespace gppca
