#include "fastabs/harness.hpp"
#include "fastabs/serialization.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fastabs;

namespace {

ExperimentConfig small(const std::string& id, int trials, int threads = 1) {
  ExperimentConfig c;
  c.experiment = id;
  c.trials = trials;
  c.base_seed = 11;
  c.threads = threads;
  return c;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("CSV headers per experiment") {
  CHECK(first_line(run_experiment(small("fig4", 1)).to_csv()) == "kind,trial,codebook,theta_deg,metric,value");
  ExperimentConfig f5 = small("fig5", 2);
  f5.snr_db = {10};
  f5.num_subcarriers = {50};
  CHECK(first_line(run_experiment(f5).to_csv()) == "kind,trial,codebook,ns,snr_db,metric,value");
  ExperimentConfig f6 = small("fig6", 2);
  f6.num_subcarriers = {50};
  CHECK(first_line(run_experiment(f6).to_csv()) == "kind,trial,case,codebook,estimator,ns,snr_db,metric,value");
  ExperimentConfig f7 = small("fig7", 2);
  f7.num_subcarriers = {50};
  CHECK(first_line(run_experiment(f7).to_csv()) == "kind,trial,codebook,ns,snr_db,x,metric,value");
  ExperimentConfig f8 = small("fig8", 2);
  f8.num_subcarriers = {50};
  CHECK(first_line(run_experiment(f8).to_csv()) == "kind,trial,codebook,ns,snr_db,x,metric,value");
  CHECK(first_line(run_experiment(small("fig10", 1)).to_csv()) == "kind,trial,policy,stage,event,s,m,p,metric,value");
}

TEST_CASE("results do not depend on the thread count") {
  for (const char* id : {"fig6", "fig7", "fig8"}) {
    ExperimentConfig one = small(id, 6, 1);
    one.num_subcarriers = {40};
    ExperimentConfig three = one;
    three.threads = 3;
    CHECK(run_experiment(one).to_csv() == run_experiment(three).to_csv());
  }
}

TEST_CASE("seeds change trial draws") {
  ExperimentConfig a = small("fig6a", 3);
  a.num_subcarriers = {40};
  ExperimentConfig b = a;
  b.base_seed = 12;
  CHECK(run_experiment(a).to_csv() != run_experiment(b).to_csv());
}

TEST_CASE("scripted scenario reproduces the expected selections and ledgers") {
  const ResultTable t = run_experiment(small("fig10", 1));
  for (const char* policy : {"FastAbs", "ExhaustiveSearch"}) {
    CHECK(t.summary("sequence_ok", {{"policy", policy}}) == 1.0);
    CHECK(t.summary("ledger_ok", {{"policy", policy}}) == 1.0);
  }
  CHECK(t.summary("total_slots", {{"policy", "FastAbs"}}) == 12.0);
  CHECK(t.summary("total_slots", {{"policy", "ExhaustiveSearch"}}) == 9.0 + 18.0 + 36.0 + 36.0);
  for (const auto& c : check_experiment(t)) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
}

TEST_CASE("result table queries") {
  ResultTable t{"x", {"a"}, {}};
  t.rows.push_back({false, 0, {"u"}, "m", 1.0});
  t.rows.push_back({false, 1, {"v"}, "m", 2.0});
  t.rows.push_back({true, 0, {"u"}, "s", 3.0});
  CHECK(t.values("m") == std::vector<double>{1.0, 2.0});
  CHECK(t.values("m", {{"a", "v"}}) == std::vector<double>{2.0});
  CHECK(t.summary("s") == 3.0);
  CHECK_FALSE(t.summary("s", {{"a", "v"}}).has_value());
  CHECK_FALSE(t.summary("m").has_value());
  CHECK(t.to_csv() == "kind,trial,a,metric,value\ntrial,0,u,m,1\ntrial,1,v,m,2\nsummary,0,u,s,3\n");
}

TEST_CASE("empirical CDF and CRLB gap") {
  const auto cdf = compute_cdf({3.0, 1.0, 2.0, 2.0}, {0.0, 1.0, 2.0, 2.5, 3.0});
  REQUIRE(cdf.size() == 5);
  CHECK(cdf[0].second == 0.0);
  CHECK(cdf[1].second == 0.25);
  CHECK(cdf[2].second == 0.75);
  CHECK(cdf[3].second == 0.75);
  CHECK(cdf[4].second == 1.0);
  CHECK_THROWS_AS(compute_cdf({}, {0.0}), std::invalid_argument);
  CHECK(compare_to_crlb(2.0, 1.0) == doctest::Approx(3.0103).epsilon(1e-4));
  CHECK(compare_to_crlb(1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(compare_to_crlb(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("presets") {
  for (const auto& name : codebook_preset_names()) CHECK(codebook_preset(name).num_beams() > 0);
  CHECK(codebook_preset("9grid").num_beams() == 9);
  CHECK(codebook_preset("es481").num_beams() == 481);
  CHECK(rad2deg((*codebook_preset("4beam").centers)[0]) == doctest::Approx(45.0));
  CHECK_THROWS_AS(codebook_preset("5beam"), std::invalid_argument);
  CHECK(layout_preset("handset2").size() == 2);
  CHECK_THROWS_AS(layout_preset("tablet"), std::invalid_argument);
}

TEST_CASE("experiment configuration validation and defaults") {
  ExperimentConfig c;
  c.experiment = "fig9";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small("custom", 1);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small("fig6", 1);
  c.codebook = "nope";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small("fig6", 0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  const ExperimentConfig r5 = resolve_config(small("fig5", 1));
  CHECK(r5.snr_db == std::vector<double>{-10, -5, 0, 5, 10, 15, 20});
  CHECK(r5.num_subcarriers == std::vector<int>{300, 825});
  const ExperimentConfig r7 = resolve_config(small("fig7", 1));
  CHECK(r7.snr_db == std::vector<double>{10});
  CHECK(r7.num_subcarriers == std::vector<int>{300});
  CHECK(resolve_config(small("fig10", 1)).scenario.has_value());
}

TEST_CASE("scenario JSON round trip") {
  const Scenario sc = default_five_stage_scenario();
  const Scenario back = parse_scenario(scenario_to_json(sc));
  REQUIRE(back.channels.size() == sc.channels.size());
  for (std::size_t s = 0; s < sc.channels.size(); ++s)
    for (std::size_t l = 0; l < sc.channels[s].paths.size(); ++l) {
      const auto& a = sc.channels[s].paths[l];
      const auto& b = back.channels[s].paths[l];
      CHECK(std::abs(a.gain - b.gain) < 1e-12);
      CHECK(a.aoa == doctest::Approx(b.aoa).epsilon(1e-13));
      CHECK(a.toa == doctest::Approx(b.toa).epsilon(1e-13));
    }
  REQUIRE(back.stages.size() == 5);
  CHECK(back.stages[3].attenuation_db == sc.stages[3].attenuation_db);
  CHECK(back.stages[2].events == sc.stages[2].events);
  CHECK(back.initial == sc.initial);
  CHECK(back.measurement_codebook == "4beam");

  CHECK_THROWS_AS(parse_scenario("{"), std::invalid_argument);
  CHECK_THROWS_AS(parse_scenario(R"({"channels": []})").validate(2), std::invalid_argument);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), std::runtime_error);
}

TEST_CASE("layout JSON round trip") {
  const ModuleLayout l = two_module_handset_layout();
  const ModuleLayout back = parse_layout(layout_to_json(l));
  REQUIRE(back.size() == 2);
  CHECK(back.rotation(0, 1) == doctest::Approx(l.rotation(0, 1)));
  CHECK(back.module(0).x == doctest::Approx(0.06));
  CHECK_THROWS_AS(parse_layout(R"({"modules": []})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_layout(R"({"modules": [{"x_m": "a"}]})"), std::invalid_argument);
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig c = small("fig7", 42);
  c.snr_db = {5, 10};
  c.num_subcarriers = {100};
  c.codebook = "3beam";
  c.estimator.kappa = 2.0;
  const ExperimentConfig back = parse_experiment_config(experiment_config_to_json(c));
  CHECK(back.experiment == "fig7");
  CHECK(back.trials == 42);
  CHECK(back.base_seed == 11);
  CHECK(back.snr_db == c.snr_db);
  CHECK(back.num_subcarriers == c.num_subcarriers);
  CHECK(back.codebook == "3beam");
  CHECK(back.estimator.kappa == 2.0);

  const ExperimentConfig partial = parse_experiment_config(R"({"trials": 7})", c);
  CHECK(partial.trials == 7);
  CHECK(partial.codebook == "3beam");
  CHECK_THROWS_AS(parse_experiment_config(R"({"trials": "many"})"), std::invalid_argument);
}

TEST_CASE("outputs are written next to a sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "fastabs_harness_test";
  std::filesystem::create_directories(dir);
  const ExperimentConfig c = small("fig10", 1);
  const ResultTable t = run_experiment(c);
  const std::string prefix = (dir / "fig10").string();
  write_outputs(t, c, prefix);
  std::ifstream csv(prefix + ".csv");
  std::stringstream body;
  body << csv.rdbuf();
  CHECK(body.str() == t.to_csv());
  std::ifstream side(prefix + ".json");
  std::string json((std::istreambuf_iterator<char>(side)), std::istreambuf_iterator<char>());
  CHECK(json.find("\"experiment\"") != std::string::npos);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(write_outputs(t, c, "/nonexistent/dir/out"), std::runtime_error);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 2, [](int i) {
                    if (i == 3) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
