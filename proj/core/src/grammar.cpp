#include "nnviterbi/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "nnviterbi/errors.hpp"

namespace nnviterbi {

namespace {

double ratio_log_prob(long long num, long long den) {
  if (num == den) return 0.0;
  return std::log(static_cast<double>(num) / static_cast<double>(den));
}

void check_labels(const Transcript& transcript, int num_classes) {
  if (transcript.empty())
    throw std::invalid_argument("transcript must be non-empty");
  for (int label : transcript) {
    if (label < 0 || label >= num_classes)
      throw std::invalid_argument("transcript label " + std::to_string(label) +
                                  " out of range for " +
                                  std::to_string(num_classes) + " classes");
  }
}

}  // namespace

Grammar Grammar::chain_from_transcript(const Transcript& transcript,
                                       int num_classes) {
  if (num_classes < 1)
    throw std::invalid_argument("num_classes must be >= 1");
  check_labels(transcript, num_classes);

  Grammar g;
  g.num_classes_ = num_classes;
  g.start_ = 0;
  const int n = static_cast<int>(transcript.size());
  g.rules_.resize(n + 1);
  g.final_.assign(n + 1, 0);
  g.final_[n] = 1;
  for (int i = 0; i < n; ++i)
    g.rules_[i].push_back(Rule{i, transcript[i], i + 1, 0.0});
  g.num_rules_ = n;
  g.validate(1e-9);
  return g;
}

Grammar Grammar::estimate(const std::vector<Transcript>& transcripts,
                          int num_classes) {
  if (num_classes < 1)
    throw std::invalid_argument("num_classes must be >= 1");
  if (transcripts.empty())
    throw std::invalid_argument("transcript list must be non-empty");

  struct Node {
    std::map<int, int> child;   // label -> node id
    std::map<int, int> count;   // label -> continuation multiplicity
    int ends = 0;
  };
  std::vector<Node> nodes(1);  // node 0 is the empty prefix / start symbol
  for (const Transcript& t : transcripts) {
    check_labels(t, num_classes);
    int cur = 0;
    for (int label : t) {
      ++nodes[cur].count[label];
      auto it = nodes[cur].child.find(label);
      if (it == nodes[cur].child.end()) {
        const int fresh = static_cast<int>(nodes.size());
        nodes[cur].child.emplace(label, fresh);
        nodes.emplace_back();
        cur = fresh;
      } else {
        cur = it->second;
      }
    }
    ++nodes[cur].ends;
  }

  Grammar g;
  g.num_classes_ = num_classes;
  g.start_ = 0;
  g.rules_.resize(nodes.size());
  g.final_.assign(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& node = nodes[i];
    if (node.ends > 0) g.final_[i] = 1;
    long long total = 0;
    for (const auto& [label, cnt] : node.count) total += cnt;
    for (const auto& [label, cnt] : node.count) {
      g.rules_[i].push_back(Rule{static_cast<int>(i), label,
                                 node.child.at(label),
                                 ratio_log_prob(cnt, total)});
      ++g.num_rules_;
    }
  }
  g.validate(1e-9);
  return g;
}

bool Grammar::is_final(int nonterminal) const {
  if (nonterminal < 0 || nonterminal >= num_nonterminals())
    throw std::invalid_argument("nonterminal id out of range");
  return final_[nonterminal] != 0;
}

std::vector<int> Grammar::finals() const {
  std::vector<int> ids;
  for (int i = 0; i < num_nonterminals(); ++i)
    if (final_[i]) ids.push_back(i);
  return ids;
}

const std::vector<Grammar::Rule>& Grammar::successors(int nonterminal) const {
  if (nonterminal < 0 || nonterminal >= num_nonterminals())
    throw std::invalid_argument("nonterminal id out of range");
  return rules_[nonterminal];
}

std::vector<Grammar::Rule> Grammar::rules() const {
  std::vector<Rule> all;
  all.reserve(num_rules_);
  for (const auto& row : rules_) all.insert(all.end(), row.begin(), row.end());
  return all;
}

bool Grammar::accepts(const Transcript& transcript) const {
  if (transcript.empty()) return false;
  std::vector<char> active(num_nonterminals(), 0);
  active[start_] = 1;
  for (int label : transcript) {
    std::vector<char> next(num_nonterminals(), 0);
    bool any = false;
    for (int h = 0; h < num_nonterminals(); ++h) {
      if (!active[h]) continue;
      for (const Rule& r : rules_[h]) {
        if (r.label == label) {
          next[r.target] = 1;
          any = true;
        }
      }
    }
    if (!any) return false;
    active.swap(next);
  }
  for (int h = 0; h < num_nonterminals(); ++h)
    if (active[h] && final_[h]) return true;
  return false;
}

void Grammar::validate(double prob_tolerance) const {
  const int m = num_nonterminals();
  if (m < 1) throw std::invalid_argument("grammar has no nonterminals");
  if (start_ < 0 || start_ >= m)
    throw std::invalid_argument("start nonterminal out of range");
  if (std::find(final_.begin(), final_.end(), 1) == final_.end())
    throw std::invalid_argument("grammar has no final nonterminal");

  for (int h = 0; h < m; ++h) {
    const auto& row = rules_[h];
    if (row.empty()) {
      if (!final_[h])
        throw std::invalid_argument("nonterminal " + std::to_string(h) +
                                    " has no rules and is not final");
      continue;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const Rule& r = row[i];
      if (r.source != h) throw std::invalid_argument("rule source mismatch");
      if (r.label < 0 || r.label >= num_classes_)
        throw std::invalid_argument("rule label out of range");
      if (r.target < 0 || r.target >= m)
        throw std::invalid_argument("rule target out of range");
      if (r.log_prob > 1e-12)
        throw std::invalid_argument("rule probability exceeds 1");
      if (i > 0 && !(row[i - 1].label < r.label ||
                     (row[i - 1].label == r.label &&
                      row[i - 1].target < r.target)))
        throw std::invalid_argument("rules not sorted or duplicated");
      sum += std::exp(r.log_prob);
    }
    if (std::abs(sum - 1.0) > prob_tolerance)
      throw std::invalid_argument(
          "rule probabilities from nonterminal " + std::to_string(h) +
          " sum to " + std::to_string(sum));
  }

  // Every final nonterminal must be reachable from the start symbol.
  std::vector<char> reached(m, 0);
  std::vector<int> stack{start_};
  reached[start_] = 1;
  while (!stack.empty()) {
    const int h = stack.back();
    stack.pop_back();
    for (const Rule& r : rules_[h]) {
      if (!reached[r.target]) {
        reached[r.target] = 1;
        stack.push_back(r.target);
      }
    }
  }
  for (int h = 0; h < m; ++h)
    if (final_[h] && !reached[h])
      throw std::invalid_argument("final nonterminal " + std::to_string(h) +
                                  " unreachable from start");
}

namespace {

int parse_id(const std::string& token, int line) {
  std::size_t pos = 0;
  int value = 0;
  try {
    value = std::stoi(token, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, "expected nonterminal id, got '" + token + "'");
  }
  if (pos != token.size() || value < 0)
    throw ParseError(line, "expected nonterminal id, got '" + token + "'");
  return value;
}

double parse_prob(const std::string& token, int line) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw ParseError(line, "expected probability, got '" + token + "'");
  }
  if (pos != token.size() || !(value >= 0.0) || value > 1.0)
    throw ParseError(line, "probability out of range: '" + token + "'");
  return value;
}

}  // namespace

Grammar Grammar::parse(std::istream& in,
                       const std::vector<std::string>& class_names) {
  std::map<std::string, int> name_to_class;
  for (std::size_t i = 0; i < class_names.size(); ++i)
    name_to_class.emplace(class_names[i], static_cast<int>(i));

  struct PendingRule {
    Rule rule;
    int line;
  };
  std::vector<PendingRule> pending;
  std::vector<int> final_ids;
  int start_id = -1;
  int max_id = -1;
  int line = 0;
  std::string text;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream tokens(text);
    std::string first;
    if (!(tokens >> first) || first[0] == '#') continue;
    std::string a, b, c, extra;
    if (first == "start") {
      if (!(tokens >> a) || (tokens >> extra))
        throw ParseError(line, "expected 'start <id>'");
      if (start_id >= 0) throw ParseError(line, "duplicate start declaration");
      start_id = parse_id(a, line);
      max_id = std::max(max_id, start_id);
    } else if (first == "final") {
      if (!(tokens >> a) || (tokens >> extra))
        throw ParseError(line, "expected 'final <id>'");
      final_ids.push_back(parse_id(a, line));
      max_id = std::max(max_id, final_ids.back());
    } else {
      if (!(tokens >> a >> b >> c) || (tokens >> extra))
        throw ParseError(line,
                         "expected '<src> <class> <dst> <prob>', got '" +
                             text + "'");
      Rule r;
      r.source = parse_id(first, line);
      auto it = name_to_class.find(a);
      if (it == name_to_class.end())
        throw ParseError(line, "unknown class name '" + a + "'");
      r.label = it->second;
      r.target = parse_id(b, line);
      const double p = parse_prob(c, line);
      r.log_prob = p == 0.0 ? kLogZero : (p == 1.0 ? 0.0 : std::log(p));
      max_id = std::max({max_id, r.source, r.target});
      pending.push_back({r, line});
    }
  }
  if (start_id < 0) throw ParseError(line, "missing start declaration");
  if (final_ids.empty()) throw ParseError(line, "missing final declaration");

  Grammar g;
  g.num_classes_ = static_cast<int>(class_names.size());
  g.start_ = start_id;
  g.rules_.resize(max_id + 1);
  g.final_.assign(max_id + 1, 0);
  for (int id : final_ids) g.final_[id] = 1;
  std::set<std::tuple<int, int, int>> seen;
  std::vector<int> last_line(max_id + 1, 0);
  for (const PendingRule& p : pending) {
    if (!seen.emplace(p.rule.source, p.rule.label, p.rule.target).second)
      throw ParseError(p.line, "duplicate rule");
    g.rules_[p.rule.source].push_back(p.rule);
    last_line[p.rule.source] = std::max(last_line[p.rule.source], p.line);
    ++g.num_rules_;
  }
  for (auto& row : g.rules_)
    std::sort(row.begin(), row.end(), [](const Rule& x, const Rule& y) {
      return x.label < y.label || (x.label == y.label && x.target < y.target);
    });
  for (int h = 0; h <= max_id; ++h) {
    if (g.rules_[h].empty()) continue;
    double sum = 0.0;
    for (const Rule& r : g.rules_[h]) sum += std::exp(r.log_prob);
    if (std::abs(sum - 1.0) > 1e-6)
      throw ParseError(last_line[h],
                       "rule probabilities from nonterminal " +
                           std::to_string(h) + " sum to " +
                           std::to_string(sum));
  }
  try {
    g.validate(1e-6);
  } catch (const std::invalid_argument& e) {
    throw ParseError(line, e.what());
  }
  return g;
}

void Grammar::serialize(std::ostream& out,
                        const std::vector<std::string>& class_names) const {
  if (static_cast<int>(class_names.size()) != num_classes_)
    throw std::invalid_argument("class name list size mismatch");
  out << "start " << start_ << "\n";
  for (int id : finals()) out << "final " << id << "\n";
  char buf[40];
  for (const auto& row : rules_) {
    for (const Rule& r : row) {
      std::snprintf(buf, sizeof(buf), "%.17g", std::exp(r.log_prob));
      out << r.source << ' ' << class_names[r.label] << ' ' << r.target << ' '
          << buf << "\n";
    }
  }
}

}  // namespace nnviterbi
