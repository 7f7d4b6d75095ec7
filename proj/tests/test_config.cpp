#include "doctest.h"
#include "gppca/config.hpp"
#include "gppca/error.hpp"

using namespace gppca;
using nlohmann::json;

TEST_CASE("empty config gives the defaults") {
  const ExperimentConfig c = parse_config(json::object());
  CHECK(c.experiment == "artificial");
  CHECK(c.prior.kernel.lengthscale == 0.2);
  CHECK(c.prior.beta == doctest::Approx(25.0));
  CHECK(c.latent_dim == 1);
  CHECK(c.mode == PosteriorMode::kSparse);
  CHECK(c.num_inducing == 20);
  CHECK(c.repetitions == 5);
  CHECK(c.fit.method == FitMethod::kLbfgs);
}

TEST_CASE("fields are read into their sections") {
  const json j = json::parse(R"({
    "experiment": "vdp",
    "vdp": {"seed": 9, "alphas": [0.5, 1.0], "initial_state": [1.0, 0.5]},
    "model": {"lengthscale": 0.5, "noise_variance": 0.01, "chart": "direct",
              "inducing_range": [-3, 3]},
    "fit": {"method": "alternating", "max_iters": 50},
    "evaluation": {"sample_sizes": [2, 5], "repetitions": 3, "methods": ["gp"]}
  })");
  const ExperimentConfig c = parse_config(j);
  CHECK(c.experiment == "vdp");
  CHECK(c.vdp.seed == 9);
  CHECK(c.vdp.alphas == std::vector<double>{0.5, 1.0});
  CHECK(c.vdp.initial_state.x == 1.0);
  CHECK(c.vdp.initial_state.v == 0.5);
  CHECK(c.prior.kernel.lengthscale == 0.5);
  CHECK(c.prior.beta == doctest::Approx(100.0));
  CHECK(c.chart == Chart::kDirect);
  REQUIRE(c.inducing_range.has_value());
  CHECK((*c.inducing_range)[0] == -3.0);
  CHECK(c.fit.method == FitMethod::kAlternating);
  CHECK(c.fit.max_iters == 50);
  CHECK(c.sample_sizes == std::vector<int>{2, 5});
  CHECK(c.methods == std::vector<Method>{Method::kGp});
}

TEST_CASE("errors name the offending field") {
  auto message = [](const char* text) {
    try {
      parse_config(json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(R"({"model": {"lenghtscale": 1}})") == "unknown key 'model.lenghtscale'");
  CHECK(message(R"({"colour": 1})") == "unknown key 'colour'");
  CHECK(message(R"({"artificial": {"num_tasks": 3}})") ==
        "missing required field 'artificial.seed'");
  CHECK(message(R"({"model": {"latent_dim": "one"}})") == "model.latent_dim: expected an integer");
  CHECK(message(R"({"model": {"mode": "dense"}})").find("model.mode") == 0);
  CHECK(message(R"({"model": {"noise_variance": 0}})").find("noise_variance") != std::string::npos);
  CHECK(message(R"({"evaluation": {"repetitions": 0}})").find("invalid configuration") == 0);
  CHECK(message(R"({"evaluation": {"methods": ["lmc"]}})").find("evaluation.methods") == 0);
  CHECK(message(R"({"vdp": {"seed": 1, "initial_state": [1]}})") ==
        "vdp.initial_state: expected an array of two numbers");
  CHECK(message("[1, 2]") == "config: expected an object");
}

TEST_CASE("resolved config round trips and hashes stably") {
  const json j = json::parse(R"({"artificial": {"seed": 4}, "evaluation": {"sample_sizes": [3]}})");
  const ExperimentConfig c = parse_config(j);
  const ExperimentConfig again = parse_config(config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
  CHECK(config_hash(again) == config_hash(c));

  ExperimentConfig other = c;
  other.artificial.seed = 5;
  CHECK(config_hash(other) != config_hash(c));
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("unreadable config files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
