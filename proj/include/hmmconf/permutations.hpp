#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace hmmconf {

inline constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

// Block-order permutations to score. perms[k] lists source block indices in
// output order; identity_index points at the identity arrangement, which is
// always present exactly once. `approximate` is set when the full set was
// subsampled to a budget; full_cardinality always reports the exact count
// (saturating at uint64 max).
struct PermutationSet {
  int d = 0;
  std::vector<std::vector<int>> perms;
  std::size_t identity_index = 0;
  bool approximate = false;
  std::uint64_t full_cardinality = 0;
};

// Number of tail arrangements: d! / (d-m-1)! ordered choices of the last
// m+1 block slots when d >= m+2, all d! orders otherwise. Saturates.
std::uint64_t tail_arrangement_count(int d, int m);

// Enumerates the permutations that realize every arrangement of the last
// m+1 block slots (blocks not selected keep their original relative order in
// the leading slots). Scores of block-permuted sequences depend only on the
// trailing positions, so this set produces every attainable score value.
// When d < m+2 the full symmetric set of d! orders is used instead. If the
// cardinality exceeds `budget`, a uniform subsample of size budget that
// retains the identity is returned and flagged approximate.
PermutationSet enumerate_tail_arrangements(int d, int m,
                                           std::uint64_t budget = kUnlimited,
                                           std::uint64_t subsample_seed = 0);

}  // namespace hmmconf
