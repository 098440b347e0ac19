#pragma once

#include <span>

#include "nnviterbi/segmentation.hpp"
#include "nnviterbi/types.hpp"

namespace nnviterbi {

// Fraction of positions where the two label sequences agree. Symmetric.
double frame_accuracy(std::span<const int> pred, std::span<const int> gt);

// Mean over ground-truth segments of |intersection| / |detection|, where
// each ground-truth segment is matched to the same-class predicted segment
// with maximal overlap (earliest on ties) and the detection is that
// predicted segment's full extent. Unmatched ground-truth segments score 0.
double jaccard_iod(const Segmentation& pred, const Segmentation& gt);

// Levenshtein distance with unit insert/delete/substitute costs.
int edit_distance(std::span<const int> a, std::span<const int> b);

// 1 - edit_distance(pred, gt) / max(|gt|, 1), clamped to [0, 1].
double unit_accuracy(std::span<const int> pred, std::span<const int> gt);

}  // namespace nnviterbi
