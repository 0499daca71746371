#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hmmconf/hmm.hpp"

namespace hmmconf {

// Partition of an augmented sequence into blocks anchored at its final pair.
// Each block starts with an occurrence of the anchor pair and runs until just
// before the next occurrence; pairs before the first occurrence form the
// prefix. The final position is itself an anchor occurrence, so the last
// block is always the single pair {anchor} and d >= 1.
//
// Rearranging blocks preserves the first element and every pairwise
// transition count provided the sequence still ends at an anchor occurrence,
// i.e. the final slot keeps a bare anchor block (the natural choice is the
// pinned last block). Such rearrangements have the same joint probability as
// the source under any Markov law, which is what makes them usable as
// randomizations of the observed sequence.
struct BlockPartition {
  StateObs anchor;
  AugmentedSequence prefix;
  std::vector<AugmentedSequence> blocks;

  std::size_t block_count() const { return blocks.size(); }
  std::size_t total_length() const;
};

BlockPartition partition_blocks(const AugmentedSequence& seq);

// Reassembles prefix + blocks[perm[0]] + ... + blocks[perm[d-1]]. The
// identity permutation reproduces the source sequence exactly.
AugmentedSequence apply_permutation(const BlockPartition& partition,
                                    std::span<const int> perm);

// True iff the sequences have equal first elements and, for every ordered
// pair of augmented states (u, v), the same number of adjacent u -> v
// transitions. Requires equal lengths.
bool check_partial_exchangeability(const AugmentedSequence& a,
                                   const AugmentedSequence& b);

}  // namespace hmmconf
