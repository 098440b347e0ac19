#pragma once

#include <array>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "nnviterbi/types.hpp"

namespace nnviterbi {

// Parameters of a single gated-recurrent layer with a softmax readout.
// Row-vector convention: a frame x (1xD) and hidden state h (1xH) update as
//   z = sigmoid(x in_update + h rec_update + b_update)
//   r = sigmoid(x in_reset  + h rec_reset  + b_reset)
//   n = tanh   (x in_cand   + (r . h) rec_cand + b_cand)
//   h' = (1 - z) . h + z . n
// followed by logits h' out_proj + b_out. Biases are stored as 1-row
// matrices so every tensor shares one type for visitation and serialization.
struct NetParams {
  Eigen::MatrixXd in_update, rec_update, b_update;
  Eigen::MatrixXd in_reset, rec_reset, b_reset;
  Eigen::MatrixXd in_cand, rec_cand, b_cand;
  Eigen::MatrixXd out_proj, b_out;

  static constexpr std::array<Eigen::MatrixXd NetParams::*, 11> kTensors = {
      &NetParams::in_update, &NetParams::rec_update, &NetParams::b_update,
      &NetParams::in_reset,  &NetParams::rec_reset,  &NetParams::b_reset,
      &NetParams::in_cand,   &NetParams::rec_cand,   &NetParams::b_cand,
      &NetParams::out_proj,  &NetParams::b_out};
  static constexpr std::array<const char*, 11> kTensorNames = {
      "in_update", "rec_update", "b_update", "in_reset", "rec_reset",
      "b_reset",   "in_cand",    "rec_cand", "b_cand",   "out_proj",
      "b_out"};

  int input_dim() const { return static_cast<int>(in_update.rows()); }
  int hidden_dim() const { return static_cast<int>(in_update.cols()); }
  int num_classes() const { return static_cast<int>(out_proj.cols()); }

  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t i = 0; i < kTensors.size(); ++i)
      f(kTensorNames[i], this->*kTensors[i]);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for (std::size_t i = 0; i < kTensors.size(); ++i)
      f(kTensorNames[i], this->*kTensors[i]);
  }

  bool all_finite() const;
  double squared_norm() const;
  bool operator==(const NetParams& other) const;
};

// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out)) per matrix, entries
// drawn row major in tensor order), zero biases. Deterministic given seed.
NetParams init_params(std::uint64_t seed, int input_dim, int hidden_dim,
                      int num_classes);

NetParams zeros_like(const NetParams& params);

// Per-frame class posteriors p(c|x_1..x_t), rows summing to 1. Initial
// hidden state zero.
PosteriorMatrix forward(const NetParams& params, const FrameSequence& frames);

// Log posteriors; the overload threads an explicit initial hidden state and
// reports the final one, for processing a sequence in consecutive chunks.
Eigen::MatrixXd log_posteriors(const NetParams& params,
                               const FrameSequence& frames);
Eigen::MatrixXd log_posteriors(const NetParams& params,
                               const FrameSequence& frames,
                               const Eigen::RowVectorXd& initial_hidden,
                               Eigen::RowVectorXd* final_hidden);

struct LossGrad {
  double loss = 0.0;
  NetParams grad;
  Eigen::RowVectorXd final_hidden;
};

// Summed cross-entropy of the sequence under `labels` plus of each extra
// frame as its own length-1 sequence (zero initial hidden state), with the
// exact gradient by backpropagation through time. The sequence recurrence
// starts from `initial_hidden`; gradients are not propagated into it.
LossGrad loss_and_gradient(const NetParams& params, const FrameSequence& frames,
                           std::span<const int> labels,
                           const FrameSequence& extra_frames,
                           std::span<const int> extra_labels,
                           const Eigen::RowVectorXd& initial_hidden);
LossGrad loss_and_gradient(const NetParams& params, const FrameSequence& frames,
                           std::span<const int> labels);

double gradient_norm(const NetParams& grad);

// params <- params - lr * grad, after scaling grad down to global norm
// `clip_threshold` if it exceeds it. Rejects non-finite gradients.
void sgd_step(NetParams& params, const NetParams& grad, double lr,
              double clip_threshold = 100.0);

}  // namespace nnviterbi
