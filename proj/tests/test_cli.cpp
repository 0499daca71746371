#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "hmmconf/conformal.hpp"
#include "hmmconf/experiments.hpp"
#include "hmmconf/format.hpp"

using namespace hmmconf;

namespace {

const std::string kCli = HMMCONF_CLI_PATH;

std::filesystem::path work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "hmmconf_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

long count_data_rows(const std::string& path) {
  const std::string text = read_text_file(path);
  long rows = -1;  // skip the header
  for (char c : text)
    if (c == '\n') ++rows;
  return rows;
}

}  // namespace

TEST_CASE("simulate: row count and byte-identical reruns") {
  auto dir = work_dir();
  auto a = (dir / "sim_a.csv").string();
  auto b = (dir / "sim_b.csv").string();
  const std::string flags = "simulate --preset two-state --p 0.9 --b 0.9 --length 203 --seed 7";
  REQUIRE(run(flags + " --output " + a) == 0);
  REQUIRE(run(flags + " --output " + b) == 0);
  CHECK(count_data_rows(a) == 203);
  CHECK(read_text_file(a) == read_text_file(b));

  auto c = (dir / "sim_c.csv").string();
  REQUIRE(run("simulate --preset two-state --p 0.9 --b 0.9 --length 203 --seed 8 --output " + c) == 0);
  CHECK(read_text_file(a) != read_text_file(c));
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run("simulate --preset two-state --b 0.9 --length 10") == 1);  // missing --p
  CHECK(run("frobnicate") == 1);
  CHECK(run("") == 1);
  CHECK(run("experiment --preset nosuch --seed 1") == 1);
}

TEST_CASE("data errors exit with 2") {
  CHECK(run("backtest --input /nonexistent.csv --states 5 --T 30") == 2);
  CHECK(run("predict --calibration /nonexistent.csv --observations /nonexistent.csv") == 2);
}

TEST_CASE("predict: single-state space") {
  auto dir = work_dir();
  auto cal = (dir / "cal1.csv").string();
  auto obs = (dir / "obs1.csv").string();
  auto out = (dir / "pred1.json").string();
  write_text_file(cal, "state,observation\n0,0\n0,0\n0,0\n");
  write_text_file(obs, "observation\n0\n");
  REQUIRE(run("predict --calibration " + cal + " --observations " + obs + " --output " + out) == 0);
  auto j = nlohmann::json::parse(read_text_file(out));
  CHECK(j["n"] == 1);
  REQUIRE(j["members"].size() == 1);
  CHECK(j["candidates"][0]["q"] == 1.0);
}

TEST_CASE("predict through the CLI equals the library call") {
  auto dir = work_dir();
  auto cal = (dir / "cal2.csv").string();
  auto obs = (dir / "obs2.csv").string();
  auto out = (dir / "pred2.json").string();

  auto params = setup_two_state(0.9, 0.9);
  auto seq = simulate(params, 62, 4242);
  AugmentedSequence calibration(seq.begin(), seq.begin() + 60);
  std::string cal_text = "state,observation\n";
  for (const auto& [x, y] : calibration)
    cal_text += std::to_string(x) + "," + std::to_string(y) + "\n";
  write_text_file(cal, cal_text);
  write_text_file(obs, "observation\n" + std::to_string(seq[60].obs) + "\n" +
                           std::to_string(seq[61].obs) + "\n");

  REQUIRE(run("predict --calibration " + cal + " --observations " + obs +
              " --alpha 0.2 --budget 0 --output " + out) == 0);
  auto j = nlohmann::json::parse(read_text_file(out));

  ConformalConfig config;
  config.alpha = 0.2;
  config.m = 2;
  config.permutation_budget = kUnlimited;
  const int test_obs[] = {seq[60].obs, seq[61].obs};
  auto ps = predict_hmm(2, 2, calibration, test_obs, config);

  REQUIRE(j["candidates"].size() == ps.candidates.size());
  for (std::size_t c = 0; c < ps.candidates.size(); ++c) {
    CHECK(j["candidates"][c]["q"] == ps.candidates[c].quantile);
    CHECK(j["candidates"][c]["member"] == ps.is_member(ps.candidates[c]));
  }
  CHECK(j["members"] == nlohmann::json(ps.members()));
}

TEST_CASE("experiment: single-config run writes one deterministic row") {
  auto dir = work_dir();
  auto csv_a = (dir / "exp_a.csv").string();
  auto csv_b = (dir / "exp_b.csv").string();
  const std::string flags =
      "experiment --preset two-state --p 0.7 --b 0.75 --T 25 --m 1 --iterations 8 --seed 5";
  REQUIRE(run(flags + " --output " + csv_a) == 0);
  REQUIRE(run(flags + " --output " + csv_b + " --workers 3") == 0);
  const std::string text = read_text_file(csv_a);
  CHECK(text == read_text_file(csv_b));
  CHECK(count_data_rows(csv_a) == 1);
  CHECK(text.starts_with(report_csv_header()));
}

TEST_CASE("backtest: summary and determinism") {
  auto dir = work_dir();
  auto input = (dir / "series.csv").string();
  std::string text = "value\n";
  double v = 100.0;
  unsigned long long state = 12345;
  for (int i = 0; i < 80; ++i) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    v += double(state >> 60) - 7.5;
    text += format_double(v) + "\n";
  }
  write_text_file(input, text);

  auto steps_a = (dir / "steps_a.csv").string();
  auto sum_a = (dir / "sum_a.json").string();
  auto steps_b = (dir / "steps_b.csv").string();
  auto sum_b = (dir / "sum_b.json").string();
  const std::string flags = "backtest --input " + input + " --states 5 --T 40 --alpha 0.2";
  REQUIRE(run(flags + " --output-steps " + steps_a + " --output-summary " + sum_a) == 0);
  REQUIRE(run(flags + " --output-steps " + steps_b + " --output-summary " + sum_b) == 0);
  CHECK(read_text_file(steps_a) == read_text_file(steps_b));
  CHECK(read_text_file(sum_a) == read_text_file(sum_b));

  auto j = nlohmann::json::parse(read_text_file(sum_a));
  CHECK(j.contains("coverage"));
  CHECK(j["steps"] == 39);
}
