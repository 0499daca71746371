#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "hmmconf/matrix.hpp"

namespace hmmconf {

// One step of the augmented chain: a hidden state together with its
// observation. The augmented process (x_t, y_t) is itself a Markov chain,
// which is what makes block-wise resampling of HMM data possible.
struct StateObs {
  int state = 0;
  int obs = 0;

  friend bool operator==(const StateObs&, const StateObs&) = default;
  friend auto operator<=>(const StateObs&, const StateObs&) = default;
};

using AugmentedSequence = std::vector<StateObs>;

// Posterior over hidden states: nonnegative entries summing to 1.
using ProbVector = std::vector<double>;

// Row-stochastic transition matrix P (n x n) and observation matrix B (n x M).
// P(i,j) = Pr(x_{t+1}=j | x_t=i), B(i,j) = Pr(y_t=j | x_t=i).
struct HmmParams {
  int n = 0;  // number of hidden states
  int M = 0;  // number of observation symbols
  Matrix P;
  Matrix B;
};

// Stochasticity is checked to 1e-12 at construction; quantities produced by
// arithmetic (filter outputs) are only held to 1e-10.
inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kProbVectorTol = 1e-10;

// Checks shapes, entry ranges and row sums; returns the validated parameters.
HmmParams validate_params(const Matrix& P, const Matrix& B);

// Throws IndexOutOfRange unless every pair fits inside the given spaces.
void validate_sequence(const AugmentedSequence& seq, int n, int M);

// Draws a length-`length` augmented sequence: x_1 uniform over states, then
// alternating state/observation draws. Bit-reproducible for a fixed seed.
AugmentedSequence simulate(const HmmParams& params, int length, std::uint64_t seed);

// Count-based estimates: Phat(i,j) = #(i -> j transitions) / #(visits to i
// among the first L-1 positions), Bhat(i,j) = #(x=i and y=j) / #(x=i). Rows
// whose denominator is zero fall back to the uniform distribution.
HmmParams estimate_params(const AugmentedSequence& seq, int n, int M);

// Forward filter: starting from probability 1 on x_start, returns for each
// k = 1..m the posterior Pr(x_{+k} = . | x_start; y_1..y_k). Each step is
// p_k = normalize(diag(B[:, y_k]) P^T p_{k-1}). Throws DegenerateLikelihood
// when a normalizer vanishes (observation impossible under the parameters).
std::vector<ProbVector> filter_posteriors(const HmmParams& params, int x_start,
                                          std::span<const int> observations);

// Reference implementation of the same posteriors by explicit enumeration of
// all n^k hidden paths per step. Guarded to m <= 10 (PathExplosion). Kept
// independent of the filter recursion so the two can cross-check each other.
std::vector<ProbVector> brute_force_posterior(const HmmParams& params, int x_start,
                                              std::span<const int> observations);

}  // namespace hmmconf
