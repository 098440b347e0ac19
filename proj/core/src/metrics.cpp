#include "nnviterbi/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnviterbi {

double frame_accuracy(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("frame_accuracy: got " +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(gt.size()) + " frames");
  if (gt.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) hits += pred[t] == gt[t];
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

double jaccard_iod(const Segmentation& pred, const Segmentation& gt) {
  if (pred.total_frames() != gt.total_frames())
    throw std::invalid_argument("jaccard_iod: total frames differ");
  if (gt.num_segments() == 0)
    throw std::invalid_argument("jaccard_iod: empty ground truth");

  struct Span {
    int label, begin, end;
  };
  const auto spans = [](const Segmentation& seg) {
    std::vector<Span> out;
    int t = 0;
    for (int n = 0; n < seg.num_segments(); ++n) {
      out.push_back({seg.labels[n], t, t + seg.lengths[n]});
      t += seg.lengths[n];
    }
    return out;
  };
  const std::vector<Span> pred_spans = spans(pred);

  double total = 0.0;
  for (const Span& g : spans(gt)) {
    int best_overlap = 0;
    int detection = 0;
    for (const Span& p : pred_spans) {
      if (p.label != g.label) continue;
      const int overlap =
          std::max(0, std::min(g.end, p.end) - std::max(g.begin, p.begin));
      if (overlap > best_overlap) {
        best_overlap = overlap;
        detection = p.end - p.begin;
      }
    }
    if (best_overlap > 0)
      total += static_cast<double>(best_overlap) / detection;
  }
  return total / gt.num_segments();
}

int edit_distance(std::span<const int> a, std::span<const int> b) {
  const std::size_t n = b.size();
  std::vector<int> row(n + 1);
  for (std::size_t j = 0; j <= n; ++j) row[j] = static_cast<int>(j);
  for (std::size_t i = 0; i < a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i) + 1;
    for (std::size_t j = 0; j < n; ++j) {
      const int subst = diag + (a[i] != b[j]);
      diag = row[j + 1];
      row[j + 1] = std::min({subst, diag + 1, row[j] + 1});
    }
  }
  return row[n];
}

double unit_accuracy(std::span<const int> pred, std::span<const int> gt) {
  const double denom = std::max<std::size_t>(gt.size(), 1);
  const double value = 1.0 - edit_distance(pred, gt) / denom;
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace nnviterbi
