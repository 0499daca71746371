#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmmconf/errors.hpp"
#include "hmmconf/experiments.hpp"
#include "hmmconf/format.hpp"

using namespace hmmconf;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "hmmconf_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.preset = Preset::two_state;
  c.p = 0.7;
  c.b = 0.75;
  c.T = 25;
  c.m = 1;
  c.alpha = 0.2;
  c.iterations = 12;
  c.master_seed = 31337;
  return c;
}

}  // namespace

TEST_CASE("two-state preset") {
  auto flat = setup_two_state(0.5, 0.5);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(flat.P(i, j) == 0.5);
      CHECK(flat.B(i, j) == 0.5);
    }

  auto ident = setup_two_state(1.0, 1.0);
  CHECK(ident.P(0, 0) == 1.0);
  CHECK(ident.P(0, 1) == 0.0);
  CHECK(ident.B(1, 1) == 1.0);

  auto sticky = setup_two_state(0.9, 0.5);
  CHECK(sticky.P(0, 0) == 0.9);
  CHECK(sticky.P(0, 1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(sticky.P(1, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(sticky.P(1, 1) == 0.9);

  CHECK_THROWS_AS(setup_two_state(1.2, 0.5), Error);
}

TEST_CASE("three-state preset") {
  auto uniform_obs = setup_three_state(1.0 / 3.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(uniform_obs.B(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto sharp = setup_three_state(1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(sharp.B(i, j) == (i == j ? 1.0 : 0.0));

  // Transition rows sum to 1 up to one rounding step.
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += sharp.P(i, j);
    CHECK(std::abs(sum - 1.0) <= 3e-16);
  }
  CHECK(sharp.P(0, 1) == 0.6);

  auto iid = setup_three_state(0.9, true);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(iid.P(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("single-iteration report equals its one record") {
  auto config = small_config();
  config.iterations = 1;
  auto report = run_coverage_experiment(config);
  REQUIRE(report.records.size() == 1);
  const auto& rec = report.records[0];
  CHECK(report.empirical_coverage == (rec.hit ? 1.0 : 0.0));
  CHECK(report.scaled_set_size == double(rec.set_size) / 2.0);
  CHECK(report.mean_blocks == double(rec.true_blocks));
  CHECK(report.mean_perms == double(rec.true_perms));
}

TEST_CASE("experiment results do not depend on the worker count") {
  auto config = small_config();
  auto solo = run_coverage_experiment(config, 1);
  auto pooled = run_coverage_experiment(config, 4);
  CHECK(solo.empirical_coverage == pooled.empirical_coverage);
  CHECK(solo.scaled_set_size == pooled.scaled_set_size);
  CHECK(solo.mean_blocks == pooled.mean_blocks);
  CHECK(solo.mean_perms == pooled.mean_perms);
  REQUIRE(solo.records.size() == pooled.records.size());
  for (std::size_t i = 0; i < solo.records.size(); ++i) {
    CHECK(solo.records[i].hit == pooled.records[i].hit);
    CHECK(solo.records[i].set_size == pooled.records[i].set_size);
    CHECK(solo.records[i].true_perms == pooled.records[i].true_perms);
  }
}

TEST_CASE("stricter alpha never shrinks prediction sets on the same seeds") {
  auto loose = small_config();
  loose.alpha = 0.3;
  auto strict = small_config();
  strict.alpha = 0.1;
  auto loose_report = run_coverage_experiment(loose);
  auto strict_report = run_coverage_experiment(strict);
  REQUIRE(loose_report.records.size() == strict_report.records.size());
  for (std::size_t i = 0; i < loose_report.records.size(); ++i)
    CHECK(strict_report.records[i].set_size >= loose_report.records[i].set_size);
  CHECK(strict_report.scaled_set_size >= loose_report.scaled_set_size);
}

TEST_CASE("reports stay within their ranges") {
  auto report = run_coverage_experiment(small_config());
  CHECK(report.empirical_coverage >= 0.0);
  CHECK(report.empirical_coverage <= 1.0);
  CHECK(report.scaled_set_size >= 0.0);
  CHECK(report.scaled_set_size <= 1.0);
}

TEST_CASE("canonical grids have the documented shape") {
  auto fig1 = two_state_grid(42);
  CHECK(fig1.size() == 135);
  CHECK(fig1[0].preset == Preset::two_state);
  CHECK(fig1[0].iterations == 500);

  auto fig2 = three_state_grid(42);
  CHECK(fig2.size() == 30);
  CHECK(fig2[0].preset == Preset::three_state);
  CHECK(fig2[15].preset == Preset::three_state_iid);

  // Row seeds are distinct so rows are independent.
  CHECK(fig1[0].master_seed != fig1[1].master_seed);
}

TEST_CASE("csv row format") {
  auto config = small_config();
  config.iterations = 3;
  auto report = run_coverage_experiment(config);
  auto header = split_csv_line(report_csv_header());
  auto row = split_csv_line(report_csv_row(report, false));
  REQUIRE(header.size() == 13);
  REQUIRE(row.size() == 13);
  CHECK(header[0] == "preset");
  CHECK(header[12] == "wall_ms");
  CHECK(row[0] == "two_state");
  CHECK(row[1] == "0.7");
  CHECK(row[12] == "0");  // deterministic unless timing is requested
  CHECK(parse_double(row[8]).has_value());
}

TEST_CASE("grid sweep: determinism, resume, and failure isolation") {
  auto csv = temp_path("sweep.csv");
  auto json = temp_path("sweep.json");
  std::filesystem::remove(csv);
  std::filesystem::remove(json);

  std::vector<ExperimentConfig> grid{small_config(), small_config()};
  grid[1].p = 0.3;
  grid[1].master_seed = 99;

  SweepOptions options;
  options.csv_path = csv.string();
  options.json_path = json.string();

  auto first = grid_sweep(grid, options);
  CHECK(first.failures.empty());
  const std::string csv_once = read_text_file(csv.string());
  CHECK(csv_once.starts_with(report_csv_header()));

  auto second = grid_sweep(grid, options);
  CHECK(read_text_file(csv.string()) == csv_once);

  // Resume: a hand-marked row proves rows are reused, not recomputed. The
  // marker lands in the wall_ms column, leaving the key columns intact.
  options.resume = true;
  std::istringstream lines(csv_once);
  std::string header_line, row0;
  std::getline(lines, header_line);
  std::getline(lines, row0);
  write_text_file(csv.string(), header_line + "\n" + row0 + "tampermark\n");
  auto resumed = grid_sweep(grid, options);
  CHECK(resumed.failures.empty());
  const std::string after = read_text_file(csv.string());
  CHECK(after.find("tampermark") != std::string::npos);  // row 0 reused verbatim
  std::filesystem::remove(csv);
  std::filesystem::remove(json);

  std::vector<ExperimentConfig> empty_grid;
  CHECK_THROWS_AS(grid_sweep(empty_grid, options), Error);

  // One broken row must not abort the rest.
  std::vector<ExperimentConfig> mixed{small_config(), small_config()};
  mixed[1].preset = Preset::custom;  // custom without matrices fails
  SweepOptions quiet;
  auto outcome = grid_sweep(mixed, quiet);
  CHECK(outcome.reports.size() == 1);
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].first == 1);
}
