#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "nnviterbi/types.hpp"

namespace nnviterbi {

// Right-regular stochastic grammar. Every rule rewrites a source nonterminal
// as a class label followed by a target nonterminal; sequences of labels are
// generated left to right starting from start() and may stop whenever the
// current nonterminal is final. Immutable after construction.
class Grammar {
 public:
  struct Rule {
    int source = 0;
    int label = 0;
    int target = 0;
    double log_prob = 0.0;  // log of the rule probability, kLogZero for 0
    bool operator==(const Rule&) const = default;
  };

  // Chain grammar that accepts exactly the given transcript: one fresh
  // nonterminal per position, every rule has probability 1.
  static Grammar chain_from_transcript(const Transcript& transcript,
                                       int num_classes);

  // Prefix-tree grammar over a set of training transcripts. One nonterminal
  // per distinct prefix; a nonterminal is final iff some transcript ends at
  // its prefix. Rule probabilities are relative frequencies among the
  // transcripts that continue past the prefix, so every nonterminal with
  // outgoing rules stays stochastic. Duplicate transcripts count with
  // multiplicity; no smoothing.
  static Grammar estimate(const std::vector<Transcript>& transcripts,
                          int num_classes);

  // Text format, class labels resolved through class_names:
  //   # comment
  //   start <id>
  //   final <id>            (repeatable)
  //   <src_id> <class_name> <dst_id> <probability>
  static Grammar parse(std::istream& in,
                       const std::vector<std::string>& class_names);
  void serialize(std::ostream& out,
                 const std::vector<std::string>& class_names) const;

  int num_nonterminals() const { return static_cast<int>(rules_.size()); }
  int num_classes() const { return num_classes_; }
  int start() const { return start_; }
  bool is_final(int nonterminal) const;
  std::vector<int> finals() const;  // ascending ids

  // Rules with the given source, ordered by (label, target).
  const std::vector<Rule>& successors(int nonterminal) const;
  std::size_t num_rules() const { return num_rules_; }
  std::vector<Rule> rules() const;  // all rules, grouped by source

  // Whether the grammar can generate the given label sequence.
  bool accepts(const Transcript& transcript) const;

  bool operator==(const Grammar&) const = default;

 private:
  Grammar() = default;
  void validate(double prob_tolerance) const;

  int num_classes_ = 0;
  int start_ = 0;
  std::size_t num_rules_ = 0;
  std::vector<char> final_;               // by nonterminal id
  std::vector<std::vector<Rule>> rules_;  // by source, sorted (label, target)
};

}  // namespace nnviterbi
