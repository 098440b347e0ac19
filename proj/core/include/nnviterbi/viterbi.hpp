#pragma once

#include "nnviterbi/grammar.hpp"
#include "nnviterbi/length_model.hpp"
#include "nnviterbi/segmentation.hpp"
#include "nnviterbi/types.hpp"

namespace nnviterbi {

struct DecodeOptions {
  int max_len = 2000;            // hard cap on a single segment's length
  bool use_length_model = true;  // false: p(l|c) treated as a constant
};

// Best grammar-accepted segmentation of a T x C score matrix:
//   argmax over segmentations of
//     sum_t score(t, c_of_frame_t)
//   + sum_segments [ log p(length_n | c_n) + log p(c_n | grammar context) ]
// including the final segment's length term. Ties are broken by preferring
// the smaller segment length, then the smaller class index, then the smaller
// nonterminal id, resolved from the last segment backwards; the brute-force
// oracle applies the same order, so equal-scoring instances decode
// identically. Throws NoPathError if the grammar admits no segmentation of
// exactly T frames.
Segmentation viterbi_decode(const ScoreMatrix& scores, const Grammar& grammar,
                            const LengthModel& lengths,
                            const DecodeOptions& options = {});

// Exhaustive reference decoder: enumerates every grammar path and every
// composition of T frames into segment lengths. Refuses T > 12.
Segmentation brute_force_decode(const ScoreMatrix& scores,
                                const Grammar& grammar,
                                const LengthModel& lengths,
                                const DecodeOptions& options = {});

// Score of a given segmentation under the same objective the decoders
// maximize. The grammar path is chosen to maximize the context terms; throws
// NoPathError if the grammar does not accept the segmentation's labels.
double score_segmentation(const Segmentation& seg, const ScoreMatrix& scores,
                          const Grammar& grammar, const LengthModel& lengths,
                          const DecodeOptions& options = {});

}  // namespace nnviterbi
