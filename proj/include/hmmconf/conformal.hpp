#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hmmconf/blocks.hpp"
#include "hmmconf/hmm.hpp"
#include "hmmconf/permutations.hpp"

namespace hmmconf {

struct ConformalConfig {
  double alpha = 0.2;                          // miscoverage level in (0,1)
  int m = 1;                                   // prediction horizon
  std::uint64_t permutation_budget = 10000;    // kUnlimited disables the cap
  std::uint64_t subsample_seed = 0;            // used only when the budget binds
};

struct CandidateResult {
  std::vector<int> states;       // the hypothesized hidden sequence, length m
  double quantile = 0.0;         // q(x); a multiple of 1/|Pi|
  int block_count = 0;           // d for this candidate's augmented sequence
  std::uint64_t perm_count = 0;  // |Pi| actually scored
  bool approximate = false;      // true when |Pi| was subsampled to the budget
};

// Prediction set over hidden-state sequences: exactly the candidates with
// q(x) > alpha. All candidates are retained (in lexicographic order) so the
// quantile map and block counts stay inspectable.
struct PredictionSet {
  int horizon = 0;
  double alpha = 0.0;
  std::vector<CandidateResult> candidates;

  bool is_member(const CandidateResult& c) const { return c.quantile > alpha; }
  std::size_t member_count() const;
  std::vector<std::vector<int>> members() const;
  bool contains(std::span<const int> states) const;
  const CandidateResult& result_for(std::span<const int> states) const;
};

// Conformity score of a block-permuted sequence: one minus the mean filtered
// posterior probability of the realized trailing states,
//   S = 1 - (1/m) sum_k Pr(x_{T+k} | x_T; y_{T+1..T+k}),
// where T+0..T+m index the last m+1 positions of `permuted`. Larger scores
// mean worse agreement. Returns exactly 1 when the filter degenerates (a
// trailing observation is impossible under the parameters).
double conformity_score(const HmmParams& params, const AugmentedSequence& permuted, int m);

// Fraction of scores at least as large as the score at identity_index,
//   q = (1/|Pi|) #{ pi : S(pi) >= S(identity) }.
// Ties count toward inclusion.
double quantile_rank(std::span<const double> scores, std::size_t identity_index);

// Full prediction-set construction. For every candidate x in X^m: append the
// (candidate, observation) pairs to the calibration sequence, estimate
// parameters by counting, partition into blocks anchored at the final pair,
// score every tail arrangement of the d-1 movable blocks (the bare final
// anchor block stays pinned so each rearrangement keeps the transition-pair
// multiset, i.e. remains a valid randomization), and rank the identity
// arrangement. The candidate enters the set iff q(x) > alpha.
//
// Deterministic given the inputs (and subsample_seed when the permutation
// budget binds). Candidate count n^m is guarded to 10^6.
PredictionSet predict_hmm(int n, int M, const AugmentedSequence& calibration,
                          std::span<const int> test_obs, const ConformalConfig& config);

// Classical single-step conformal prediction for exchangeable pairs.
// Larger score means worse agreement between a state and an observation.
using ClassicalScore = std::function<double(int state, int obs)>;

// Default score A(i, y) = 1 - Bhat(i, y) with Bhat estimated from the
// calibration pairs by counting.
ClassicalScore counting_score(const AugmentedSequence& calibration, int n, int M);

// Includes state i iff the rank of A(i, y_test) among the calibration scores
// plus itself is within ceil((1-alpha)(T+1)).
std::vector<int> classical_predict(int n, const AugmentedSequence& calibration,
                                   int test_obs, double alpha,
                                   const ClassicalScore& score);

}  // namespace hmmconf
