#include "nnviterbi/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "nnviterbi/errors.hpp"

namespace nnviterbi {

namespace {

constexpr char kMagic[6] = {'N', 'N', 'V', 'I', 'T', '1'};

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw IoError(path + ": " + what);
}

// Effective lambda per class, -1 where the model cannot evaluate lengths
// yet. Stored redundantly so a loader can cross-check the raw state.
std::vector<double> lambda_table(const LengthModel& lengths) {
  std::vector<double> table(lengths.num_classes(), -1.0);
  for (int c = 0; c < lengths.num_classes(); ++c)
    if (lengths.initialized(c)) table[c] = lengths.lambda(c);
  return table;
}

void write_state(std::ostream& out, const TrainerState& state) {
  out.write(kMagic, sizeof kMagic);
  const NetParams& p = state.params;
  io::write_scalar(out, static_cast<std::uint32_t>(p.input_dim()));
  io::write_scalar(out, static_cast<std::uint32_t>(p.hidden_dim()));
  io::write_scalar(out, static_cast<std::uint32_t>(p.num_classes()));
  for (auto member : NetParams::kTensors) {
    const Eigen::MatrixXd& m = p.*member;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        io::write_scalar(out, m(r, c));
  }
  const int num_classes = state.prior.num_classes();
  for (double lambda : lambda_table(state.lengths))
    io::write_scalar(out, lambda);
  for (int c = 0; c < num_classes; ++c)
    io::write_scalar(out, state.prior.frame_count(c));
  io::write_scalar(out, state.iteration);
  for (int c = 0; c < num_classes; ++c)
    io::write_scalar(out, state.lengths.segment_count(c));
  for (int c = 0; c < num_classes; ++c)
    io::write_scalar(out, state.lengths.length_sum(c));
  for (int c = 0; c < num_classes; ++c)
    io::write_scalar(out, state.lengths.seed_lambda(c));
  std::ostringstream rng_text;
  rng_text << state.rng;
  const std::string rng = rng_text.str();
  io::write_scalar(out, static_cast<std::uint32_t>(rng.size()));
  out.write(rng.data(), static_cast<std::streamsize>(rng.size()));
  io::write_scalar(out, static_cast<std::uint64_t>(state.buffer.capacity()));
  io::write_scalar(out, static_cast<std::uint64_t>(state.buffer.size()));
  for (std::size_t i = 0; i < state.buffer.size(); ++i) {
    const ReplayBuffer::Entry& entry = state.buffer.entry(i);
    io::write_scalar(out, static_cast<std::uint32_t>(entry.video_index));
    io::write_scalar(out, static_cast<std::uint32_t>(entry.labels.size()));
    for (int label : entry.labels) io::write_scalar(out, label);
  }
}

}  // namespace

void save_checkpoint(const TrainerState& state, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(tmp, "cannot open for writing");
    write_state(out, state);
    out.flush();
    if (!out) fail(tmp, "write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail(path, "rename from temp file failed");
}

TrainerState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) ||
      !std::equal(magic, magic + sizeof magic, kMagic))
    fail(path, "not a checkpoint (bad magic)");
  std::uint32_t input_dim = 0, hidden_dim = 0, num_classes = 0;
  if (!io::read_scalar(in, input_dim) || !io::read_scalar(in, hidden_dim) ||
      !io::read_scalar(in, num_classes))
    fail(path, "truncated header");
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1)
    fail(path, "invalid dimensions");

  NetParams params = init_params(0, static_cast<int>(input_dim),
                                 static_cast<int>(hidden_dim),
                                 static_cast<int>(num_classes));
  for (auto member : NetParams::kTensors) {
    Eigen::MatrixXd& m = params.*member;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!io::read_scalar(in, m(r, c))) fail(path, "truncated tensor data");
  }
  if (!params.all_finite()) fail(path, "non-finite network weights");

  const int C = static_cast<int>(num_classes);
  std::vector<double> stored_lambda(C);
  std::vector<std::uint64_t> prior_counts(C);
  std::uint64_t iteration = 0;
  std::vector<std::uint64_t> length_counts(C);
  std::vector<double> length_sums(C), length_seeds(C);
  for (double& v : stored_lambda)
    if (!io::read_scalar(in, v)) fail(path, "truncated lambda table");
  for (std::uint64_t& v : prior_counts)
    if (!io::read_scalar(in, v)) fail(path, "truncated prior counts");
  if (!io::read_scalar(in, iteration)) fail(path, "truncated iteration");
  for (std::uint64_t& v : length_counts)
    if (!io::read_scalar(in, v)) fail(path, "truncated length counts");
  for (double& v : length_sums)
    if (!io::read_scalar(in, v)) fail(path, "truncated length sums");
  for (double& v : length_seeds)
    if (!io::read_scalar(in, v)) fail(path, "truncated length seeds");

  std::uint32_t rng_size = 0;
  if (!io::read_scalar(in, rng_size)) fail(path, "truncated rng state");
  std::string rng_text(rng_size, '\0');
  if (!in.read(rng_text.data(), rng_size)) fail(path, "truncated rng state");

  std::uint64_t buffer_capacity = 0, buffer_count = 0;
  if (!io::read_scalar(in, buffer_capacity) ||
      !io::read_scalar(in, buffer_count))
    fail(path, "truncated buffer header");

  TrainerState state(C, static_cast<std::size_t>(buffer_capacity));
  state.params = std::move(params);
  state.prior = ClassPrior::restore(std::move(prior_counts));
  state.lengths = LengthModel::restore(std::move(length_counts),
                                       std::move(length_sums),
                                       std::move(length_seeds));
  state.iteration = iteration;
  std::istringstream rng_in(rng_text);
  rng_in >> state.rng;
  if (!rng_in) fail(path, "unparseable rng state");

  for (std::uint64_t i = 0; i < buffer_count; ++i) {
    std::uint32_t video_index = 0, num_labels = 0;
    if (!io::read_scalar(in, video_index) ||
        !io::read_scalar(in, num_labels))
      fail(path, "truncated buffer entry");
    std::vector<int> labels(num_labels);
    for (int& label : labels)
      if (!io::read_scalar(in, label)) fail(path, "truncated buffer labels");
    state.buffer.append(static_cast<int>(video_index), std::move(labels));
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    fail(path, "trailing bytes after checkpoint data");

  // The lambda table is derived state; recomputing it from the restored
  // model must reproduce the stored doubles exactly.
  const std::vector<double> recomputed = lambda_table(state.lengths);
  for (int c = 0; c < C; ++c)
    if (recomputed[c] != stored_lambda[c])
      fail(path, "lambda table does not match length model state");
  return state;
}

}  // namespace nnviterbi
