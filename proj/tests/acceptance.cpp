// Acceptance gate: one self-contained check per criterion, each printing a
// single PASS/FAIL line with its measured quantities and time. Exits 0 only
// if every criterion passes.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nnviterbi/dataset.hpp"
#include "nnviterbi/errors.hpp"
#include "nnviterbi/evaluate.hpp"
#include "nnviterbi/grammar.hpp"
#include "nnviterbi/metrics.hpp"
#include "nnviterbi/network.hpp"
#include "nnviterbi/rng.hpp"
#include "nnviterbi/trainer.hpp"
#include "nnviterbi/viterbi.hpp"
#include "test_support.hpp"

using namespace nnviterbi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- AC-1 ----
// Dynamic-programming decoder vs exhaustive enumeration on random small
// instances: identical labels and lengths, scores within 1e-9.
Outcome ac1_decoder_oracle() {
  constexpr int kInstances = 1200;
  constexpr double kScoreTol = 1e-9;
  std::mt19937_64 gen(20260822);
  int agreed = 0;
  for (int i = 0; i < kInstances; ++i) {
    const auto inst = test_support::random_decode_instance(gen, i % 2 == 1);
    Segmentation fast, brute;
    bool fast_path = true, brute_path = true;
    try {
      fast = viterbi_decode(inst.scores, inst.grammar, inst.lengths,
                            inst.options);
    } catch (const NoPathError&) {
      fast_path = false;
    }
    try {
      brute = brute_force_decode(inst.scores, inst.grammar, inst.lengths,
                                 inst.options);
    } catch (const NoPathError&) {
      brute_path = false;
    }
    if (fast_path != brute_path) {
      return {false, format("instance %d: reachability disagrees", i)};
    }
    if (!fast_path) {
      ++agreed;
      continue;
    }
    if (fast.labels != brute.labels || fast.lengths != brute.lengths ||
        std::abs(fast.score - brute.score) > kScoreTol) {
      return {false, format("instance %d: paths disagree (dscore %.3g)", i,
                            fast.score - brute.score)};
    }
    ++agreed;
  }
  return {true, format("%d/%d instances agree, score tol %.0e", agreed,
                       kInstances, kScoreTol)};
}

// ---------------------------------------------------------------- AC-2 ----
// Analytic gradients vs central finite differences at (D,H,C,T)=(4,8,3,12),
// 20 seeds, sequence loss plus buffered-frame loss.
Outcome ac2_gradient_oracle() {
  constexpr int kD = 4, kH = 8, kC = 3, kT = 12, kExtra = 5;
  constexpr double kEps = 1e-5, kTol = 1e-4;
  double worst = 0.0;
  for (std::uint64_t seed = 101; seed <= 120; ++seed) {
    std::uint64_t stream = seed;
    NetParams params = init_params(rng::split_seed(stream), kD, kH, kC);
    std::mt19937_64 gen(rng::split_seed(stream));
    FrameSequence frames(kT, kD), extra(kExtra, kD);
    std::vector<int> labels(kT), extra_labels(kExtra);
    for (int t = 0; t < kT; ++t) {
      for (int d = 0; d < kD; ++d) frames(t, d) = rng::normal(gen);
      labels[t] = static_cast<int>(rng::uniform_index(gen, kC));
    }
    for (int k = 0; k < kExtra; ++k) {
      for (int d = 0; d < kD; ++d) extra(k, d) = rng::normal(gen);
      extra_labels[k] = static_cast<int>(rng::uniform_index(gen, kC));
    }
    Eigen::RowVectorXd hidden(kH);
    for (int h = 0; h < kH; ++h) hidden(h) = 0.5 * rng::normal(gen);

    const auto loss_at = [&](const NetParams& p) {
      return loss_and_gradient(p, frames, labels, extra, extra_labels, hidden)
          .loss;
    };
    const NetParams grad =
        loss_and_gradient(params, frames, labels, extra, extra_labels, hidden)
            .grad;
    for (auto member : NetParams::kTensors) {
      Eigen::MatrixXd& tensor = params.*member;
      const Eigen::MatrixXd& analytic = grad.*member;
      for (Eigen::Index r = 0; r < tensor.rows(); ++r)
        for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
          const double saved = tensor(r, c);
          tensor(r, c) = saved + kEps;
          const double up = loss_at(params);
          tensor(r, c) = saved - kEps;
          const double down = loss_at(params);
          tensor(r, c) = saved;
          const double fd = (up - down) / (2.0 * kEps);
          const double g = analytic(r, c);
          const double rel = std::abs(fd - g) /
                             std::max({std::abs(fd), std::abs(g), 1e-4});
          worst = std::max(worst, rel);
        }
    }
  }
  return {worst < kTol, format("max rel err %.3g over 20 seeds (tol %.0e)",
                               worst, kTol)};
}

// -------------------------------------------------------- AC-3 .. AC-5 ----
// Shared synthetic benchmark: the stock three-cluster dataset widened to
// spread 2.0 so the ablations have visible effect at this scale while the
// full system stays comfortably above the bar.
Dataset benchmark_dataset() {
  SynthConfig config = default_synth_config();
  config.spread = 2.0;
  config.seed = 1;
  return generate_synthetic(config);
}

Grammar benchmark_grammar(const Dataset& ds) {
  std::vector<Transcript> transcripts;
  for (int i : ds.train_indices) transcripts.push_back(ds.videos[i].transcript);
  return Grammar::estimate(transcripts, ds.num_classes());
}

TrainConfig benchmark_config(std::uint64_t seed, int sampling_ratio,
                             bool use_length_model) {
  TrainConfig config;
  config.seed = seed;
  config.sampling_ratio = sampling_ratio;
  config.use_length_model = use_length_model;
  return config;
}

double test_frame_accuracy(const Dataset& ds, const Grammar& grammar,
                           const TrainerState& state, EvalTask task,
                           bool use_length_model) {
  const DecodeOptions options{2000, use_length_model};
  return evaluate_dataset(state.params, state.prior, state.lengths, ds,
                          ds.test_indices, task, grammar, options, 4)
      .frame_accuracy;
}

Outcome ac3_learning(const Dataset& ds, const Grammar& grammar,
                     double* fa_out) {
  const TrainerState state = train(ds, benchmark_config(1, 25, true));
  const double seg = test_frame_accuracy(ds, grammar, state,
                                         EvalTask::kSegment, true);
  const double align = test_frame_accuracy(ds, grammar, state,
                                           EvalTask::kAlign, true);
  *fa_out = seg;
  const bool pass = seg >= 0.85 && align >= seg;
  return {pass, format("segmentation FA %.4f (>= 0.85), alignment FA %.4f "
                       "(>= segmentation)",
                       seg, align)};
}

// Presentation order for the incremental-learning comparison: sequences
// containing the rare heavy class first, then only the two-class videos, so
// pure online training has 1000 iterations in which to forget.
std::vector<int> grouped_order(const Dataset& ds) {
  std::vector<int> with_two, without_two;
  for (int i : ds.train_indices) {
    const Transcript& t = ds.videos[i].transcript;
    (std::find(t.begin(), t.end(), 2) != t.end() ? with_two : without_two)
        .push_back(i);
  }
  std::vector<int> order;
  for (int i = 0; i < 1000; ++i)
    order.push_back(with_two[i % with_two.size()]);
  for (int i = 0; i < 1000; ++i)
    order.push_back(without_two[i % without_two.size()]);
  return order;
}

Outcome ac4_buffer_ablation(const Dataset& ds, const Grammar& grammar) {
  const std::vector<int> order = grouped_order(ds);
  double mean_buffered = 0.0, mean_online = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const TrainerState buffered =
        train(ds, benchmark_config(seed, 25, true), order);
    const TrainerState online =
        train(ds, benchmark_config(seed, 0, true), order);
    mean_buffered += test_frame_accuracy(ds, grammar, buffered,
                                         EvalTask::kSegment, true) / 3.0;
    mean_online += test_frame_accuracy(ds, grammar, online,
                                       EvalTask::kSegment, true) / 3.0;
  }
  const double gap = mean_buffered - mean_online;
  return {gap >= 0.05,
          format("grouped order, 3 seeds: 1:25 sampling FA %.4f vs online FA "
                 "%.4f, gap %.1f pp (>= 5)",
                 mean_buffered, mean_online, 100.0 * gap)};
}

Outcome ac5_length_ablation(const Dataset& ds, const Grammar& grammar,
                            double fa_seed1_with) {
  double mean_with = fa_seed1_with / 3.0, mean_without = 0.0;
  for (std::uint64_t seed = 2; seed <= 3; ++seed) {
    const TrainerState state = train(ds, benchmark_config(seed, 25, true));
    mean_with += test_frame_accuracy(ds, grammar, state,
                                     EvalTask::kSegment, true) / 3.0;
  }
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const TrainerState state = train(ds, benchmark_config(seed, 25, false));
    mean_without += test_frame_accuracy(ds, grammar, state,
                                        EvalTask::kSegment, false) / 3.0;
  }
  const double gap = mean_with - mean_without;
  return {gap >= 0.05,
          format("3 seeds: with length model FA %.4f vs without %.4f, gap "
                 "%.1f pp (>= 5)",
                 mean_with, mean_without, 100.0 * gap)};
}

// ---------------------------------------------------------------- AC-6 ----
// Decode wall time vs sequence length at fixed grammar and max length:
// linear growth means doubling T at most ~doubles the time.
Outcome ac6_decoder_scaling() {
  constexpr int kClasses = 3;
  Transcript transcript(40);
  for (int i = 0; i < 40; ++i) transcript[i] = i % kClasses;
  const Grammar grammar = Grammar::chain_from_transcript(transcript, kClasses);
  const LengthModel lengths = LengthModel::restore(
      std::vector<std::uint64_t>(kClasses, 1),
      std::vector<double>(kClasses, 300.0),
      std::vector<double>(kClasses, 0.0));
  const DecodeOptions options{600, true};

  std::mt19937_64 gen(4242);
  const auto make_scores = [&](int frames) {
    ScoreMatrix scores(frames, kClasses);
    for (int t = 0; t < frames; ++t)
      for (int c = 0; c < kClasses; ++c) scores(t, c) = rng::normal(gen);
    return scores;
  };
  const auto time_decode = [&](const ScoreMatrix& scores) {
    const auto start = std::chrono::steady_clock::now();
    const Segmentation seg = viterbi_decode(scores, grammar, lengths, options);
    const double elapsed = seconds_since(start);
    if (seg.labels.empty()) return -1.0;
    return elapsed;
  };

  const ScoreMatrix half = make_scores(10000);
  const ScoreMatrix full = make_scores(20000);
  time_decode(half);  // warmup
  std::vector<double> ratios;
  for (int rep = 0; rep < 3; ++rep)
    ratios.push_back(time_decode(full) / time_decode(half));
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios[1];
  return {median <= 2.5,
          format("median time(T=20000)/time(T=10000) = %.2f over 3 runs "
                 "(<= 2.5)",
                 median)};
}

// ---------------------------------------------------------------- AC-7 ----
// The documented metric examples, exactly, plus the edit-distance triangle
// inequality on random transcript triples.
Outcome ac7_metric_examples() {
  constexpr double kUlpTol = 1e-12;  // fractional values: final rounding only
  const auto close = [&](double a, double b) {
    return std::abs(a - b) <= kUlpTol;
  };
  std::vector<std::string> failures;
  const auto expect = [&](bool ok, const char* what) {
    if (!ok) failures.push_back(what);
  };

  const std::vector<int> aab{0, 0, 1}, abb{0, 1, 1};
  const std::vector<int> zeros{0, 0}, ones{1, 1};
  expect(frame_accuracy(aab, aab) == 1.0, "frame accuracy identity");
  expect(frame_accuracy(zeros, ones) == 0.0, "frame accuracy disjoint");
  expect(close(frame_accuracy(aab, abb), 2.0 / 3.0), "frame accuracy 2/3");
  expect(close(frame_accuracy(abb, aab), 2.0 / 3.0),
         "frame accuracy symmetry");

  const auto seg = [](std::vector<int> labels, std::vector<int> lens) {
    Segmentation s;
    s.labels = std::move(labels);
    s.lengths = std::move(lens);
    return s;
  };
  expect(jaccard_iod(seg({0, 1}, {2, 2}), seg({0, 1}, {2, 2})) == 1.0,
         "jaccard identity");
  expect(jaccard_iod(seg({1}, {4}), seg({0}, {4})) == 0.0,
         "jaccard class-disjoint");
  expect(jaccard_iod(seg({0, 1}, {2, 2}), seg({0}, {4})) == 1.0,
         "jaccard gt (a,4) vs pred (a,2)(b,2)");
  expect(close(jaccard_iod(seg({0, 1}, {6, 2}), seg({0, 1}, {4, 4})),
               5.0 / 6.0),
         "jaccard gt (a,4)(b,4) vs pred (a,6)(b,2)");

  const std::vector<int> abc{0, 1, 2}, axc{0, 3, 2}, abcd{0, 1, 2, 3}, none;
  expect(unit_accuracy(abc, abc) == 1.0, "unit identity");
  expect(close(unit_accuracy(axc, abc), 2.0 / 3.0), "unit accuracy 2/3");
  expect(unit_accuracy(none, abcd) == 0.0, "unit empty prediction");

  std::mt19937_64 gen(77);
  const auto random_transcript = [&] {
    std::vector<int> t(rng::uniform_index(gen, 7));
    for (int& v : t) v = static_cast<int>(rng::uniform_index(gen, 4));
    return t;
  };
  bool triangle = true, identity = true, symmetry = true;
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_transcript(), b = random_transcript(),
               c = random_transcript();
    const int ab = edit_distance(a, b), bc = edit_distance(b, c),
              ac = edit_distance(a, c);
    triangle = triangle && ac <= ab + bc;
    identity = identity && edit_distance(a, a) == 0;
    symmetry = symmetry && ab == edit_distance(b, a);
  }
  expect(triangle, "edit distance triangle inequality");
  expect(identity, "edit distance identity");
  expect(symmetry, "edit distance symmetry");

  if (!failures.empty())
    return {false, format("%zu example(s) failed, first: %s", failures.size(),
                          failures.front().c_str())};
  return {true, "11 documented examples match, triangle inequality on 10000 "
                "random triples"};
}

// ---------------------------------------------------------------- AC-8 ----
// The shipped binary run end to end twice with one seed: every produced
// artifact must be bitwise identical.
std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing " + path.string() + ">";
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome ac8_determinism() {
  const fs::path root =
      fs::temp_directory_path() /
      ("nnviterbi_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const auto pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const std::string cli = NNVITERBI_CLI_PATH;
    const std::string steps =
        "cd \"" + dir.string() + "\" && \"" + cli +
        "\" synth --out data --seed 1 && \"" + cli +
        "\" train --dataset data --out run --seed 1 && \"" + cli +
        "\" eval --dataset data --checkpoint run/model.ckpt --out evalout "
        "--jobs 4";
    const int status =
        std::system(("(" + steps + ") > /dev/null 2>&1").c_str());
    return status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  const bool ran = pipeline(root / "a") && pipeline(root / "b");
  if (!ran) {
    fs::remove_all(root);
    return {false, "pipeline run failed (nonzero exit)"};
  }
  for (const char* file :
       {"run/model.ckpt", "evalout/report.csv", "evalout/report.txt",
        "run/train_log.csv", "run/run.json", "evalout/run.json"}) {
    if (read_bytes(root / "a" / file) != read_bytes(root / "b" / file)) {
      fs::remove_all(root);
      return {false, format("%s differs between identical runs", file)};
    }
  }
  fs::remove_all(root);
  return {true, "checkpoint, reports, log, and run records bitwise identical "
                "across two seeded pipelines"};
}

}  // namespace

int main() {
  struct Row {
    const char* id;
    const char* name;
    Outcome outcome;
    double seconds;
  };
  std::vector<Row> rows;
  const auto run = [&](const char* id, const char* name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = body();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    rows.push_back({id, name, std::move(outcome), seconds_since(start)});
    const Row& row = rows.back();
    std::printf("%-5s %-22s %s  %s  [%.1f s]\n", row.id, row.name,
                row.outcome.pass ? "PASS" : "FAIL", row.outcome.detail.c_str(),
                row.seconds);
    std::fflush(stdout);
  };

  run("AC-1", "decoder oracle", ac1_decoder_oracle);
  run("AC-2", "gradient oracle", ac2_gradient_oracle);

  const Dataset ds = benchmark_dataset();
  const Grammar grammar = benchmark_grammar(ds);
  double fa_seed1 = 0.0;
  run("AC-3", "weak supervision", [&] { return ac3_learning(ds, grammar,
                                                            &fa_seed1); });
  run("AC-4", "buffer ablation",
      [&] { return ac4_buffer_ablation(ds, grammar); });
  run("AC-5", "length-model ablation",
      [&] { return ac5_length_ablation(ds, grammar, fa_seed1); });
  run("AC-6", "decoder scaling", ac6_decoder_scaling);
  run("AC-7", "metric examples", ac7_metric_examples);
  run("AC-8", "determinism", ac8_determinism);

  int passed = 0;
  for (const Row& row : rows) passed += row.outcome.pass ? 1 : 0;
  std::printf("acceptance: %d/%d criteria pass\n", passed,
              static_cast<int>(rows.size()));
  return passed == static_cast<int>(rows.size()) ? 0 : 1;
}
