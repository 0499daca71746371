#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmmconf/conformal.hpp"
#include "hmmconf/hmm.hpp"

namespace hmmconf {

enum class Preset { two_state, three_state, three_state_iid, custom };

std::string preset_name(Preset preset);
std::optional<Preset> preset_from_name(const std::string& name);

// Symmetric two-state family: P = [[p, 1-p], [1-p, p]], B = [[b, 1-b], [1-b, b]].
// p = 0.5 gives IID states, b = 0.5 gives uninformative observations.
HmmParams setup_two_state(double p, double b);

// Rotating three-state transition matrix with a symmetric observation matrix
// parameterized by b; the iid variant replaces every transition entry by 1/3.
HmmParams setup_three_state(double b, bool iid_variant = false);

struct ExperimentConfig {
  Preset preset = Preset::two_state;
  double p = 0.5;  // transition parameter (two-state only)
  double b = 0.5;  // observation parameter
  HmmParams custom;
  int T = 100;
  int m = 1;
  double alpha = 0.2;
  int iterations = 500;
  std::uint64_t master_seed = 0;
  // When unset, presets with n <= 3, T <= 200, m <= 3 enumerate exhaustively
  // and everything else is capped at 10000 permutations.
  std::optional<std::uint64_t> permutation_budget;
};

HmmParams preset_params(const ExperimentConfig& config);
std::uint64_t resolve_budget(const ExperimentConfig& config);

struct IterationRecord {
  bool hit = false;
  std::uint64_t set_size = 0;
  int true_blocks = 0;        // d when the candidate is the true sequence
  std::uint64_t true_perms = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  double empirical_coverage = 0.0;
  double scaled_set_size = 0.0;  // E|C| / n^m
  double mean_blocks = 0.0;
  double mean_perms = 0.0;
  std::vector<IterationRecord> records;
  std::int64_t wall_ms = 0;
  // Rows reloaded from a previous sweep keep their original CSV text and
  // carry no per-iteration records.
  std::string resumed_csv_row;
};

// Monte-Carlo estimate of coverage and scaled set size. Iteration i draws
// its sequence from mix_seed(master_seed, i), so any worker count produces
// the identical report.
ExperimentReport run_coverage_experiment(const ExperimentConfig& config, int workers = 1);

struct SweepOptions {
  std::string csv_path;    // empty: no CSV written
  std::string json_path;   // empty: no JSON written
  int workers = 1;
  bool resume = false;     // reuse rows of an existing CSV matched by config
  bool timing = false;     // emit measured wall_ms instead of 0
};

struct SweepOutcome {
  std::vector<ExperimentReport> reports;
  std::vector<std::pair<std::size_t, std::string>> failures;  // grid index, reason
};

// Runs every config in order; a failing row is reported and skipped without
// aborting the rest of the sweep.
SweepOutcome grid_sweep(std::span<const ExperimentConfig> grid, const SweepOptions& options);

// Canonical parameter grids. Per-row master seeds derive from the sweep seed
// by row index.
std::vector<ExperimentConfig> two_state_grid(std::uint64_t master_seed, int iterations = 500);
std::vector<ExperimentConfig> three_state_grid(std::uint64_t master_seed, int iterations = 500);

std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& report, bool timing);
std::string reports_json(std::span<const ExperimentReport> reports, bool timing);

}  // namespace hmmconf
