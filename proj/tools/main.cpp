#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnviterbi/checkpoint.hpp"
#include "nnviterbi/dataset.hpp"
#include "nnviterbi/errors.hpp"
#include "nnviterbi/evaluate.hpp"
#include "nnviterbi/grammar.hpp"
#include "nnviterbi/segmentation.hpp"
#include "nnviterbi/trainer.hpp"
#include "nnviterbi/types.hpp"

namespace fs = std::filesystem;
using namespace nnviterbi;

namespace {

// Invocation problems (as opposed to runtime failures) exit with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Union of everything the config file and the flags can set. Each
// subcommand reads the fields it cares about and ignores the rest.
struct RunConfig {
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::string order_file;
  std::string task = "segment";  // eval: segment | align
  std::string split = "test";    // segment/align/eval: train | test
  int jobs = 1;
  int num_train = 60;  // synth
  int num_test = 20;   // synth
  double spread = 1.0; // synth
  TrainConfig train;
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  return s.substr(begin, s.find_last_not_of(" \t\r") - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw std::runtime_error("config key '" + key + "': expected " + expected +
                           ", got '" + value + "'");
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos == value.size()) return v;
  } catch (...) {
  }
  bad_value(key, value, "an integer");
}

std::uint64_t to_uint64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos == value.size() && value[0] != '-') return v;
  } catch (...) {
  }
  bad_value(key, value, "a non-negative integer");
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos == value.size()) return v;
  } catch (...) {
  }
  bad_value(key, value, "a number");
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

void apply_key(RunConfig& rc, const std::string& key,
               const std::string& value) {
  if (key == "dataset") rc.dataset = value;
  else if (key == "checkpoint") rc.checkpoint = value;
  else if (key == "out") rc.out = value;
  else if (key == "order_file") rc.order_file = value;
  else if (key == "task") rc.task = value;
  else if (key == "split") rc.split = value;
  else if (key == "jobs") rc.jobs = to_int(key, value);
  else if (key == "num_train") rc.num_train = to_int(key, value);
  else if (key == "num_test") rc.num_test = to_int(key, value);
  else if (key == "spread") rc.spread = to_double(key, value);
  else if (key == "iterations") rc.train.iterations = to_int(key, value);
  else if (key == "lr_initial") rc.train.lr_initial = to_double(key, value);
  else if (key == "lr_drop_iteration")
    rc.train.lr_drop_iteration = to_int(key, value);
  else if (key == "lr_dropped") rc.train.lr_dropped = to_double(key, value);
  else if (key == "sampling_ratio")
    rc.train.sampling_ratio = to_int(key, value);
  else if (key == "buffer_capacity")
    rc.train.buffer_capacity = to_uint64(key, value);
  else if (key == "minibatch_frames")
    rc.train.minibatch_frames = to_int(key, value);
  else if (key == "max_len") rc.train.max_len = to_int(key, value);
  else if (key == "batch_size") rc.train.batch_size = to_int(key, value);
  else if (key == "hidden_size") rc.train.hidden_size = to_int(key, value);
  else if (key == "clip_threshold")
    rc.train.clip_threshold = to_double(key, value);
  else if (key == "use_length_model")
    rc.train.use_length_model = to_bool(key, value);
  else if (key == "length_init") {
    if (value == "segments_over_frames")
      rc.train.length_init = UnseenLengthInit::kSegmentsOverFrames;
    else if (value == "frames_over_segments")
      rc.train.length_init = UnseenLengthInit::kFramesOverSegments;
    else
      bad_value(key, value, "segments_over_frames or frames_over_segments");
  } else if (key == "seed") rc.train.seed = to_uint64(key, value);
  else if (key == "checkpoint_period")
    rc.train.checkpoint_period = to_int(key, value);
  else
    throw std::runtime_error("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(number) +
                               ": expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(number) +
                               ": empty key");
    try {
      apply_key(rc, key, value);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(number) + ": " +
                               e.what());
    }
  }
}

nlohmann::json config_snapshot(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  return nlohmann::json{
      {"dataset", rc.dataset},
      {"checkpoint", rc.checkpoint},
      {"out", rc.out},
      {"order_file", rc.order_file},
      {"task", rc.task},
      {"split", rc.split},
      {"jobs", rc.jobs},
      {"num_train", rc.num_train},
      {"num_test", rc.num_test},
      {"spread", rc.spread},
      {"iterations", t.iterations},
      {"lr_initial", t.lr_initial},
      {"lr_drop_iteration", t.lr_drop_iteration},
      {"lr_dropped", t.lr_dropped},
      {"sampling_ratio", t.sampling_ratio},
      {"buffer_capacity", t.buffer_capacity},
      {"minibatch_frames", t.minibatch_frames},
      {"max_len", t.max_len},
      {"batch_size", t.batch_size},
      {"hidden_size", t.hidden_size},
      {"clip_threshold", t.clip_threshold},
      {"use_length_model", t.use_length_model},
      {"length_init", t.length_init == UnseenLengthInit::kSegmentsOverFrames
                          ? "segments_over_frames"
                          : "frames_over_segments"},
      {"seed", t.seed},
      {"checkpoint_period", t.checkpoint_period}};
}

// Provenance record next to the outputs: everything needed to reproduce the
// run, and nothing volatile, so identical runs write identical records.
void write_run_record(const RunConfig& rc, const std::string& command) {
  const nlohmann::json record{{"command", command},
                              {"version", kVersion},
                              {"seed", rc.train.seed},
                              {"config", config_snapshot(rc)}};
  std::ofstream out(fs::path(rc.out) / "run.json",
                    std::ios::binary | std::ios::trunc);
  out << record.dump(2) << '\n';
  if (!out) throw std::runtime_error(rc.out + "/run.json: write failed");
}

void require(bool ok, const char* message) {
  if (!ok) throw UsageError(message);
}

fs::path make_out_dir(const RunConfig& rc) {
  require(!rc.out.empty(), "--out (or config key 'out') is required");
  fs::create_directories(rc.out);
  return rc.out;
}

Dataset open_dataset(const RunConfig& rc) {
  require(!rc.dataset.empty(), "--dataset (or config key 'dataset') is required");
  return load_dataset(rc.dataset);
}

TrainerState open_checkpoint(const RunConfig& rc, const Dataset& ds) {
  require(!rc.checkpoint.empty(),
          "--checkpoint (or config key 'checkpoint') is required");
  TrainerState state = load_checkpoint(rc.checkpoint);
  if (state.prior.num_classes() != ds.num_classes())
    throw std::runtime_error(rc.checkpoint + ": trained for " +
                             std::to_string(state.prior.num_classes()) +
                             " classes, dataset has " +
                             std::to_string(ds.num_classes()));
  if (state.params.input_dim() != ds.feature_dim())
    throw std::runtime_error(rc.checkpoint + ": trained on " +
                             std::to_string(state.params.input_dim()) +
                             "-dim features, dataset has " +
                             std::to_string(ds.feature_dim()));
  return state;
}

std::span<const int> split_indices(const RunConfig& rc, const Dataset& ds) {
  if (rc.split == "test") return ds.test_indices;
  if (rc.split == "train") return ds.train_indices;
  throw std::runtime_error("split must be 'train' or 'test', got '" +
                           rc.split + "'");
}

std::vector<Transcript> train_transcripts(const Dataset& ds) {
  std::vector<Transcript> out;
  for (int i : ds.train_indices) out.push_back(ds.videos[i].transcript);
  return out;
}

Grammar dataset_grammar(const Dataset& ds) {
  if (ds.grammar) return *ds.grammar;
  if (ds.train_indices.empty())
    throw std::runtime_error(
        "dataset has no grammar.txt and no training transcripts to estimate "
        "one from");
  return Grammar::estimate(train_transcripts(ds), ds.num_classes());
}

void write_label_file(const fs::path& path, const std::vector<int>& labels,
                      const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (int label : labels) out << names[label] << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

int run_synth(const RunConfig& rc) {
  const fs::path out = make_out_dir(rc);
  SynthConfig sc = default_synth_config();
  sc.seed = rc.train.seed;
  sc.num_train = rc.num_train;
  sc.num_test = rc.num_test;
  sc.spread = rc.spread;
  Dataset ds = generate_synthetic(sc);
  ds.grammar = Grammar::estimate(train_transcripts(ds), ds.num_classes());
  save_dataset(out, ds);
  write_run_record(rc, "synth");
  std::cout << "wrote " << ds.videos.size() << " videos ("
            << ds.train_indices.size() << " train, " << ds.test_indices.size()
            << " test) to " << out.string() << "\n";
  return 0;
}

int run_train(const RunConfig& rc) {
  const Dataset ds = open_dataset(rc);
  const fs::path out = make_out_dir(rc);

  std::vector<int> order;
  if (!rc.order_file.empty()) {
    std::ifstream in(rc.order_file);
    if (!in)
      throw std::runtime_error(rc.order_file + ": cannot open order file");
    std::string id;
    while (std::getline(in, id)) {
      id = trim(id);
      if (id.empty()) continue;
      const int index = ds.find_video(id);
      if (index < 0)
        throw std::runtime_error(rc.order_file + ": unknown video id '" + id +
                                 "'");
      order.push_back(index);
    }
  }

  const std::string checkpoint = rc.checkpoint.empty()
                                     ? (out / "model.ckpt").string()
                                     : rc.checkpoint;
  std::ofstream log(out / "train_log.csv", std::ios::binary | std::ios::trunc);
  log << kTrainLogHeader << '\n';
  write_run_record(rc, "train");
  const TrainerState state = train(ds, rc.train, order, &log, checkpoint);
  log.flush();
  if (!log) throw std::runtime_error("train_log.csv: write failed");
  std::cout << "trained " << state.iteration << " iterations, checkpoint at "
            << checkpoint << "\n";
  return 0;
}

int run_decode(const RunConfig& rc, bool align) {
  const Dataset ds = open_dataset(rc);
  const TrainerState state = open_checkpoint(rc, ds);
  const fs::path out = make_out_dir(rc);
  const std::span<const int> indices = split_indices(rc, ds);
  const DecodeOptions options{rc.train.max_len, rc.train.use_length_model};
  std::optional<Grammar> grammar;
  if (!align) grammar = dataset_grammar(ds);
  for (int index : indices) {
    const Video& video = ds.videos[index];
    const Segmentation seg =
        align ? align_sequence(state.params, state.prior, state.lengths,
                               video.features, video.transcript, options)
              : segment_sequence(state.params, state.prior, state.lengths,
                                 video.features, *grammar, options);
    write_label_file(out / (video.id + ".txt"), expand_framewise(seg),
                     ds.label_names);
  }
  write_run_record(rc, align ? "align" : "segment");
  std::cout << "wrote " << indices.size() << " label files to " << out.string()
            << "\n";
  return 0;
}

int run_eval(const RunConfig& rc) {
  const Dataset ds = open_dataset(rc);
  const TrainerState state = open_checkpoint(rc, ds);
  const fs::path out = make_out_dir(rc);
  const std::span<const int> indices = split_indices(rc, ds);
  EvalTask task;
  if (rc.task == "segment") task = EvalTask::kSegment;
  else if (rc.task == "align") task = EvalTask::kAlign;
  else
    throw std::runtime_error("task must be 'segment' or 'align', got '" +
                             rc.task + "'");
  const DecodeOptions options{rc.train.max_len, rc.train.use_length_model};
  // Alignment ignores the grammar argument, so a stand-in chain suffices.
  const Grammar grammar = task == EvalTask::kAlign
                              ? Grammar::chain_from_transcript({0},
                                                               ds.num_classes())
                              : dataset_grammar(ds);
  const EvalReport report =
      evaluate_dataset(state.params, state.prior, state.lengths, ds, indices,
                       task, grammar, options, rc.jobs);
  std::ofstream csv(out / "report.csv", std::ios::binary | std::ios::trunc);
  csv << report.to_csv();
  std::ofstream text(out / "report.txt", std::ios::binary | std::ios::trunc);
  text << report.to_text();
  if (!csv || !text) throw std::runtime_error("report write failed");
  write_run_record(rc, "eval");
  std::cout << report.to_text();
  return 0;
}

int run_grammar_estimate(const RunConfig& rc) {
  const Dataset ds = open_dataset(rc);
  const fs::path out = make_out_dir(rc);
  if (ds.train_indices.empty())
    throw std::runtime_error("dataset has no training transcripts");
  const Grammar grammar =
      Grammar::estimate(train_transcripts(ds), ds.num_classes());
  std::ofstream file(out / "grammar.txt", std::ios::binary | std::ios::trunc);
  grammar.serialize(file, ds.label_names);
  if (!file) throw std::runtime_error("grammar.txt: write failed");
  write_run_record(rc, "grammar-estimate");
  std::cout << "wrote grammar with " << grammar.num_rules() << " rules to "
            << (out / "grammar.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised sequence segmentation: train a frame "
               "classifier from ordered transcripts, then segment or align "
               "unseen sequences"};
  app.require_subcommand(1);

  // Raw flag values; only the ones the active subcommand actually received
  // override the config file.
  std::string config, dataset, checkpoint, out, order_file, task, split;
  std::uint64_t seed = 0, buffer_capacity = 0;
  int iterations = 0, sampling_ratio = 0, batch_size = 0, max_len = 0,
      jobs = 0;

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "key = value config file");
    sub->add_option("--out", out, "output directory");
  };
  const auto add_dataset = [&](CLI::App* sub) {
    sub->add_option("--dataset", dataset, "dataset directory");
  };
  const auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", checkpoint, "model checkpoint path");
  };
  const auto add_decode = [&](CLI::App* sub) {
    sub->add_option("--max-len", max_len, "maximum segment length");
    sub->add_option("--split", split, "video split: train or test");
  };

  CLI::App* train_cmd = app.add_subcommand(
      "train", "Train from (features, transcript) pairs");
  add_config(train_cmd);
  add_dataset(train_cmd);
  add_checkpoint(train_cmd);
  train_cmd->add_option("--seed", seed, "master random seed");
  train_cmd->add_option("--iterations", iterations, "training iterations");
  train_cmd->add_option("--sampling-ratio", sampling_ratio,
                        "buffered frames per sequence frame");
  train_cmd->add_option("--buffer-capacity", buffer_capacity,
                        "buffer size in sequences, 0 = unlimited");
  train_cmd->add_option("--batch-size", batch_size, "sequences per update");
  train_cmd->add_option("--max-len", max_len, "maximum segment length");
  train_cmd->add_option("--order-file", order_file,
                        "file of video ids fixing the training order");

  CLI::App* segment_cmd = app.add_subcommand(
      "segment", "Decode test videos under the dataset grammar");
  add_config(segment_cmd);
  add_dataset(segment_cmd);
  add_checkpoint(segment_cmd);
  add_decode(segment_cmd);

  CLI::App* align_cmd = app.add_subcommand(
      "align", "Infer segment lengths for known transcripts");
  add_config(align_cmd);
  add_dataset(align_cmd);
  add_checkpoint(align_cmd);
  add_decode(align_cmd);

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score decodes against ground truth");
  add_config(eval_cmd);
  add_dataset(eval_cmd);
  add_checkpoint(eval_cmd);
  add_decode(eval_cmd);
  eval_cmd->add_option("--task", task, "evaluation task: segment or align");
  eval_cmd->add_option("--jobs", jobs, "evaluation threads");

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic dataset");
  add_config(synth_cmd);
  synth_cmd->add_option("--seed", seed, "master random seed");

  CLI::App* grammar_cmd = app.add_subcommand(
      "grammar-estimate", "Write grammar.txt covering the training transcripts");
  add_config(grammar_cmd);
  add_dataset(grammar_cmd);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }
    CLI::App* sub = app.get_subcommands().at(0);
    const auto provided = [&](const char* name) {
      const CLI::Option* option = sub->get_option_no_throw(name);
      return option != nullptr && option->count() > 0;
    };

    RunConfig rc;
    if (provided("--config")) apply_config_file(rc, config);
    if (provided("--dataset")) rc.dataset = dataset;
    if (provided("--checkpoint")) rc.checkpoint = checkpoint;
    if (provided("--out")) rc.out = out;
    if (provided("--order-file")) rc.order_file = order_file;
    if (provided("--task")) rc.task = task;
    if (provided("--split")) rc.split = split;
    if (provided("--seed")) rc.train.seed = seed;
    if (provided("--iterations")) rc.train.iterations = iterations;
    if (provided("--sampling-ratio")) rc.train.sampling_ratio = sampling_ratio;
    if (provided("--buffer-capacity"))
      rc.train.buffer_capacity = buffer_capacity;
    if (provided("--batch-size")) rc.train.batch_size = batch_size;
    if (provided("--max-len")) rc.train.max_len = max_len;
    if (provided("--jobs")) rc.jobs = jobs;

    const std::string name = sub->get_name();
    if (name == "train") return run_train(rc);
    if (name == "segment") return run_decode(rc, false);
    if (name == "align") return run_decode(rc, true);
    if (name == "eval") return run_eval(rc);
    if (name == "synth") return run_synth(rc);
    return run_grammar_estimate(rc);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
