#include "nnviterbi/viterbi.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nnviterbi/errors.hpp"

namespace nnviterbi {

namespace {

constexpr double kUnreached = -std::numeric_limits<double>::infinity();

void check_decode_inputs(const ScoreMatrix& scores, const Grammar& grammar,
                         const DecodeOptions& options) {
  if (scores.rows() < 1)
    throw std::invalid_argument("score matrix must have at least one frame");
  if (scores.cols() != grammar.num_classes())
    throw std::invalid_argument("score matrix class count (" +
                                std::to_string(scores.cols()) +
                                ") does not match grammar (" +
                                std::to_string(grammar.num_classes()) + ")");
  if (!scores.allFinite())
    throw std::invalid_argument("score matrix contains non-finite entries");
  if (options.max_len < 1)
    throw std::invalid_argument("max_len must be >= 1");
}

// Per-class table of log p(length|class) for lengths 1..max_len. The
// log-factorial part is precomputed once; classes without grammar rules are
// never touched. With the length model disabled every entry is 0.
class LengthTable {
 public:
  LengthTable(const Grammar& grammar, const LengthModel& lengths, int max_len,
              bool use_length_model)
      : max_len_(max_len), rows_(grammar.num_classes()) {
    std::vector<char> used(grammar.num_classes(), 0);
    for (const Grammar::Rule& r : grammar.rules()) used[r.label] = 1;
    std::vector<double> log_factorial(max_len + 1, 0.0);
    for (int l = 1; l <= max_len; ++l)
      log_factorial[l] = std::lgamma(l + 1.0);
    for (int c = 0; c < grammar.num_classes(); ++c) {
      if (!used[c]) continue;
      rows_[c].assign(max_len + 1, 0.0);
      if (!use_length_model) continue;
      const double lam = lengths.lambda(c);
      const double log_lam = std::log(lam);
      for (int l = 1; l <= max_len; ++l)
        rows_[c][l] = l * log_lam - lam - log_factorial[l];
    }
  }

  double operator()(int c, int length) const {
    assert(length >= 1 && length <= max_len_ && !rows_[c].empty());
    return rows_[c][length];
  }

 private:
  int max_len_;
  std::vector<std::vector<double>> rows_;
};

// Candidate tie order shared by both decoders: higher score wins; ties
// compare the last segment's (length, class, target nonterminal, source
// nonterminal), then the segment before it, and so on. Both decoders
// accumulate every path in the same canonical order (a segment's frames left
// to right, then its length term, then its context term), so a path scores
// bitwise-identically in both; tied paths still differ by rounding of their
// different term orders, hence ties are detected within a tolerance that
// sits far above accumulated rounding and far below real score gaps at the
// sequence lengths where ties matter. Beyond that, float order decides,
// which is still deterministic.
constexpr double kScoreTieTolerance = 1e-9;

struct TieKey {
  int len;
  int label;
  int target;
  int source;
  bool operator<(const TieKey& o) const {
    if (len != o.len) return len < o.len;
    if (label != o.label) return label < o.label;
    if (target != o.target) return target < o.target;
    return source < o.source;
  }
};

}  // namespace

Segmentation viterbi_decode(const ScoreMatrix& scores, const Grammar& grammar,
                            const LengthModel& lengths,
                            const DecodeOptions& options) {
  check_decode_inputs(scores, grammar, options);
  const int t_total = static_cast<int>(scores.rows());
  const int cap = std::min(options.max_len, t_total);
  const LengthTable length_table(grammar, lengths, cap,
                                 options.use_length_model);

  // One hypothesis track per grammar rule: "the open segment was entered via
  // this rule". rules are grouped by target so all ways to end a segment in
  // a given context are adjacent.
  const std::vector<Grammar::Rule> rules = grammar.rules();
  const int num_rules = static_cast<int>(rules.size());
  const int m = grammar.num_nonterminals();
  std::vector<std::vector<int>> by_target(m), by_source(m);
  for (int r = 0; r < num_rules; ++r) {
    by_target[rules[r].target].push_back(r);
    by_source[rules[r].source].push_back(r);
  }

  // window[r] holds, for every possible start frame tau of an open segment
  // entered via rule r, the canonical-order partial path score including the
  // segment's frames tau..t (but not its length or context term). Ring
  // indexed by tau; starts older than max_len frames are dead.
  const int ring = cap + 1;
  std::vector<double> window(static_cast<std::size_t>(num_rules) * ring,
                             kUnreached);
  const auto slot = [&](int r, int tau) -> double& {
    return window[static_cast<std::size_t>(r) * ring + tau % ring];
  };

  // Backpointers at segment opens: the previous segment's rule and length.
  std::vector<int> back_rule(static_cast<std::size_t>(t_total + 1) * num_rules,
                             -1);
  std::vector<int> back_len(back_rule.size(), 0);
  const auto cell = [&](int tau, int r) {
    return static_cast<std::size_t>(tau) * num_rules + r;
  };

  for (int r : by_source[grammar.start()])
    slot(r, 1) = scores(0, rules[r].label);

  struct Bound {
    double score = kUnreached;
    TieKey key{};
    int rule = -1;
    int len = 0;
  };
  const auto better = [](double cand, const TieKey& key, const Bound& best) {
    if (best.rule < 0) return true;
    if (std::abs(cand - best.score) <= kScoreTieTolerance)
      return key < best.key;
    return cand > best.score;
  };
  std::vector<Bound> bound(m);

  for (int t = 2; t <= t_total; ++t) {
    const int prev = t - 1;
    const int max_prev_len = std::min(prev, cap);
    // Best way to close a segment at frame t-1, per resulting context.
    for (int h = 0; h < m; ++h) {
      if (by_source[h].empty()) continue;  // no rule ever leaves this context
      Bound best;
      for (int r : by_target[h]) {
        const int label = rules[r].label;
        for (int len = 1; len <= max_prev_len; ++len) {
          const int tau = t - len;
          const double open = slot(r, tau);
          if (open == kUnreached) continue;
          double cand = open + length_table(label, len);
          cand += rules[r].log_prob;
          const TieKey key{len, label, h, rules[r].source};
          if (better(cand, key, best)) best = Bound{cand, key, r, len};
        }
      }
      bound[h] = best;
    }
    // Advance every open segment by one frame, then open new segments.
    for (int r = 0; r < num_rules; ++r) {
      const double frame_score = scores(t - 1, rules[r].label);
      const int oldest = std::max(1, t - cap);
      for (int tau = oldest; tau < t; ++tau) {
        double& value = slot(r, tau);
        if (value != kUnreached) value += frame_score;
      }
      const Bound& b = bound[rules[r].source];
      if (b.rule >= 0) {
        slot(r, t) = b.score + frame_score;
        back_rule[cell(t, r)] = b.rule;
        back_len[cell(t, r)] = b.len;
      } else {
        slot(r, t) = kUnreached;
      }
    }
  }

  // Close the final segment; its length and context terms apply here.
  Bound final_best;
  for (int r = 0; r < num_rules; ++r) {
    if (!grammar.is_final(rules[r].target)) continue;
    const int label = rules[r].label;
    for (int len = 1; len <= cap; ++len) {
      const int tau = t_total - len + 1;
      const double open = slot(r, tau);
      if (open == kUnreached) continue;
      double cand = open + length_table(label, len);
      cand += rules[r].log_prob;
      const TieKey key{len, label, rules[r].target, rules[r].source};
      if (better(cand, key, final_best)) final_best = Bound{cand, key, r, len};
    }
  }
  if (final_best.rule < 0)
    throw NoPathError("grammar admits no segmentation of " +
                      std::to_string(t_total) + " frames");

  Segmentation seg;
  seg.score = final_best.score;
  int tau = t_total - final_best.len + 1;
  int r = final_best.rule;
  seg.labels.push_back(rules[r].label);
  seg.lengths.push_back(final_best.len);
  while (back_rule[cell(tau, r)] >= 0) {
    const int prev_rule = back_rule[cell(tau, r)];
    const int prev_len = back_len[cell(tau, r)];
    tau -= prev_len;
    r = prev_rule;
    seg.labels.push_back(rules[r].label);
    seg.lengths.push_back(prev_len);
  }
  assert(tau == 1);
  std::reverse(seg.labels.begin(), seg.labels.end());
  std::reverse(seg.lengths.begin(), seg.lengths.end());
  return seg;
}

namespace {

struct PathStep {
  int label;
  int target;
  int source;
  double ctx;
};

bool beats(const std::vector<PathStep>& path_a, const std::vector<int>& len_a,
           double score_a, const std::vector<PathStep>& path_b,
           const std::vector<int>& len_b, double score_b) {
  if (std::abs(score_a - score_b) > kScoreTieTolerance)
    return score_a > score_b;
  const std::size_t n = std::min(path_a.size(), path_b.size());
  for (std::size_t i = 1; i <= n; ++i) {
    const PathStep& a = path_a[path_a.size() - i];
    const PathStep& b = path_b[path_b.size() - i];
    const TieKey ka{len_a[len_a.size() - i], a.label, a.target, a.source};
    const TieKey kb{len_b[len_b.size() - i], b.label, b.target, b.source};
    if (ka < kb) return true;
    if (kb < ka) return false;
  }
  return false;  // identical (paths of different segment counts cannot tie
                 // while agreeing on every compared suffix segment)
}

}  // namespace

Segmentation brute_force_decode(const ScoreMatrix& scores,
                                const Grammar& grammar,
                                const LengthModel& lengths,
                                const DecodeOptions& options) {
  check_decode_inputs(scores, grammar, options);
  const int t_total = static_cast<int>(scores.rows());
  if (t_total > 12)
    throw std::logic_error(
        "brute_force_decode is an exhaustive oracle; refusing T > 12");
  const int cap = std::min(options.max_len, t_total);
  const LengthTable length_table(grammar, lengths, cap,
                                 options.use_length_model);

  std::vector<PathStep> path;
  std::vector<int> comp;
  std::vector<PathStep> best_path;
  std::vector<int> best_comp;
  double best_score = kUnreached;
  bool found = false;

  // Scores one composition of the current path in canonical order: a
  // segment's frames, then its length term, then its context term.
  const auto try_composition = [&]() {
    double total = 0.0;
    int t = 0;
    for (std::size_t n = 0; n < path.size(); ++n) {
      for (int i = 0; i < comp[n]; ++i) total += scores(t++, path[n].label);
      total += length_table(path[n].label, comp[n]);
      total += path[n].ctx;
    }
    if (!found || beats(path, comp, total, best_path, best_comp, best_score)) {
      best_path = path;
      best_comp = comp;
      best_score = total;
      found = true;
    }
  };

  // All ways to split remaining frames over the path's remaining segments.
  const auto compose = [&](auto&& self, std::size_t n, int remaining) -> void {
    const int left = static_cast<int>(path.size() - n);
    if (left == 0) {
      if (remaining == 0) try_composition();
      return;
    }
    for (int len = 1; len <= std::min(cap, remaining - left + 1); ++len) {
      comp.push_back(len);
      self(self, n + 1, remaining - len);
      comp.pop_back();
    }
  };

  // Depth-first over grammar paths of at most T segments.
  const auto walk = [&](auto&& self, int nonterminal) -> void {
    if (!path.empty() && grammar.is_final(nonterminal))
      compose(compose, 0, t_total);
    if (static_cast<int>(path.size()) == t_total) return;
    for (const Grammar::Rule& rule : grammar.successors(nonterminal)) {
      path.push_back(
          PathStep{rule.label, rule.target, rule.source, rule.log_prob});
      self(self, rule.target);
      path.pop_back();
    }
  };
  walk(walk, grammar.start());

  if (!found)
    throw NoPathError("grammar admits no segmentation of " +
                      std::to_string(t_total) + " frames");
  Segmentation seg;
  seg.score = best_score;
  for (std::size_t n = 0; n < best_path.size(); ++n) {
    seg.labels.push_back(best_path[n].label);
    seg.lengths.push_back(best_comp[n]);
  }
  return seg;
}

double score_segmentation(const Segmentation& seg, const ScoreMatrix& scores,
                          const Grammar& grammar, const LengthModel& lengths,
                          const DecodeOptions& options) {
  check_decode_inputs(scores, grammar, options);
  if (seg.num_segments() == 0)
    throw std::invalid_argument("segmentation must have segments");
  if (seg.total_frames() != scores.rows())
    throw std::invalid_argument("segmentation frame count mismatch");
  const int cap = std::min(options.max_len, static_cast<int>(scores.rows()));
  const LengthTable length_table(grammar, lengths, cap,
                                 options.use_length_model);

  double total = 0.0;
  int t = 0;
  for (int n = 0; n < seg.num_segments(); ++n) {
    if (seg.lengths[n] < 1 || seg.lengths[n] > cap)
      throw std::invalid_argument("segment length outside [1, max_len]");
    for (int i = 0; i < seg.lengths[n]; ++i) total += scores(t++, seg.labels[n]);
    total += length_table(seg.labels[n], seg.lengths[n]);
  }

  // Best chain of context terms over nonterminal paths generating the labels.
  std::vector<double> reach(grammar.num_nonterminals(), kUnreached);
  reach[grammar.start()] = 0.0;
  for (int label : seg.labels) {
    std::vector<double> next(grammar.num_nonterminals(), kUnreached);
    for (int h = 0; h < grammar.num_nonterminals(); ++h) {
      if (reach[h] == kUnreached) continue;
      for (const Grammar::Rule& rule : grammar.successors(h)) {
        if (rule.label != label) continue;
        next[rule.target] = std::max(next[rule.target], reach[h] + rule.log_prob);
      }
    }
    reach.swap(next);
  }
  double best_ctx = kUnreached;
  for (int h = 0; h < grammar.num_nonterminals(); ++h)
    if (grammar.is_final(h)) best_ctx = std::max(best_ctx, reach[h]);
  if (best_ctx == kUnreached)
    throw NoPathError("grammar does not accept the segmentation's labels");
  return total + best_ctx;
}

}  // namespace nnviterbi
