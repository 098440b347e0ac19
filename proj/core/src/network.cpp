#include "nnviterbi/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nnviterbi/rng.hpp"

namespace nnviterbi {

namespace {

Eigen::RowVectorXd sigmoid(const Eigen::RowVectorXd& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

Eigen::RowVectorXd log_softmax_row(const Eigen::RowVectorXd& logits) {
  const double peak = logits.maxCoeff();
  const double log_norm =
      peak + std::log((logits.array() - peak).exp().sum());
  return (logits.array() - log_norm).matrix();
}

void check_frames(const NetParams& params, const FrameSequence& frames,
                  const char* what) {
  if (frames.cols() != params.input_dim())
    throw std::invalid_argument(std::string(what) + " width " +
                                std::to_string(frames.cols()) +
                                " does not match input dim " +
                                std::to_string(params.input_dim()));
  if (!frames.allFinite())
    throw std::invalid_argument(std::string(what) +
                                " contains non-finite values");
}

void check_labels(const NetParams& params, std::span<const int> labels,
                  Eigen::Index count, const char* what) {
  if (static_cast<Eigen::Index>(labels.size()) != count)
    throw std::invalid_argument(std::string(what) + " label count " +
                                std::to_string(labels.size()) +
                                " does not match frame count " +
                                std::to_string(count));
  for (int label : labels)
    if (label < 0 || label >= params.num_classes())
      throw std::invalid_argument(std::string(what) + " label " +
                                  std::to_string(label) + " out of range");
}

struct SequencePass {
  Eigen::MatrixXd h;        // (T+1)xH, row 0 is the initial hidden state
  Eigen::MatrixXd z, r, n;  // TxH gate activations
  Eigen::MatrixXd logp;     // TxC log posteriors
};

SequencePass run_forward(const NetParams& p, const FrameSequence& x,
                         const Eigen::RowVectorXd& h0) {
  const Eigen::Index t_total = x.rows();
  const int hidden = p.hidden_dim();
  if (h0.size() != hidden)
    throw std::invalid_argument("initial hidden state has size " +
                                std::to_string(h0.size()) + ", expected " +
                                std::to_string(hidden));
  SequencePass s;
  s.h.resize(t_total + 1, hidden);
  s.h.row(0) = h0;
  s.z.resize(t_total, hidden);
  s.r.resize(t_total, hidden);
  s.n.resize(t_total, hidden);
  s.logp.resize(t_total, p.num_classes());
  for (Eigen::Index t = 0; t < t_total; ++t) {
    const auto xt = x.row(t);
    const Eigen::RowVectorXd prev = s.h.row(t);
    s.z.row(t) = sigmoid(xt * p.in_update + prev * p.rec_update + p.b_update);
    s.r.row(t) = sigmoid(xt * p.in_reset + prev * p.rec_reset + p.b_reset);
    s.n.row(t) = (xt * p.in_cand +
                  s.r.row(t).cwiseProduct(prev) * p.rec_cand + p.b_cand)
                     .array()
                     .tanh();
    s.h.row(t + 1) = (1.0 - s.z.row(t).array()) * prev.array() +
                     s.z.row(t).array() * s.n.row(t).array();
    s.logp.row(t) = log_softmax_row(s.h.row(t + 1) * p.out_proj + p.b_out);
  }
  return s;
}

}  // namespace

bool NetParams::all_finite() const {
  for (auto member : kTensors)
    if (!(this->*member).allFinite()) return false;
  return true;
}

double NetParams::squared_norm() const {
  double total = 0.0;
  for (auto member : kTensors) total += (this->*member).squaredNorm();
  return total;
}

bool NetParams::operator==(const NetParams& other) const {
  for (auto member : kTensors) {
    const Eigen::MatrixXd& a = this->*member;
    const Eigen::MatrixXd& b = other.*member;
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (!(a.array() == b.array()).all()) return false;
  }
  return true;
}

NetParams init_params(std::uint64_t seed, int input_dim, int hidden_dim,
                      int num_classes) {
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1)
    throw std::invalid_argument("network dims must be >= 1");
  NetParams p;
  p.in_update.resize(input_dim, hidden_dim);
  p.rec_update.resize(hidden_dim, hidden_dim);
  p.b_update = Eigen::MatrixXd::Zero(1, hidden_dim);
  p.in_reset.resize(input_dim, hidden_dim);
  p.rec_reset.resize(hidden_dim, hidden_dim);
  p.b_reset = Eigen::MatrixXd::Zero(1, hidden_dim);
  p.in_cand.resize(input_dim, hidden_dim);
  p.rec_cand.resize(hidden_dim, hidden_dim);
  p.b_cand = Eigen::MatrixXd::Zero(1, hidden_dim);
  p.out_proj.resize(hidden_dim, num_classes);
  p.b_out = Eigen::MatrixXd::Zero(1, num_classes);

  std::mt19937_64 gen(seed);
  p.for_each_tensor([&](const char* name, Eigen::MatrixXd& w) {
    if (name[0] == 'b') return;  // biases stay zero
    const double limit = std::sqrt(6.0 / (w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = rng::uniform_range(gen, -limit, limit);
  });
  return p;
}

NetParams zeros_like(const NetParams& params) {
  NetParams z;
  for (auto member : NetParams::kTensors)
    z.*member = Eigen::MatrixXd::Zero((params.*member).rows(),
                                      (params.*member).cols());
  return z;
}

PosteriorMatrix forward(const NetParams& params, const FrameSequence& frames) {
  return log_posteriors(params, frames).array().exp().matrix();
}

Eigen::MatrixXd log_posteriors(const NetParams& params,
                               const FrameSequence& frames) {
  return log_posteriors(params, frames,
                        Eigen::RowVectorXd::Zero(params.hidden_dim()),
                        nullptr);
}

Eigen::MatrixXd log_posteriors(const NetParams& params,
                               const FrameSequence& frames,
                               const Eigen::RowVectorXd& initial_hidden,
                               Eigen::RowVectorXd* final_hidden) {
  check_frames(params, frames, "frame sequence");
  SequencePass s = run_forward(params, frames, initial_hidden);
  if (final_hidden) *final_hidden = s.h.row(frames.rows());
  return std::move(s.logp);
}

LossGrad loss_and_gradient(const NetParams& params, const FrameSequence& frames,
                           std::span<const int> labels,
                           const FrameSequence& extra_frames,
                           std::span<const int> extra_labels,
                           const Eigen::RowVectorXd& initial_hidden) {
  check_frames(params, frames, "frame sequence");
  check_labels(params, labels, frames.rows(), "sequence");
  if (extra_frames.rows() > 0)
    check_frames(params, extra_frames, "extra frames");
  check_labels(params, extra_labels, extra_frames.rows(), "extra");

  const Eigen::Index t_total = frames.rows();
  LossGrad out;
  out.grad = zeros_like(params);
  NetParams& g = out.grad;

  const SequencePass s = run_forward(params, frames, initial_hidden);
  out.final_hidden = s.h.row(t_total);
  for (Eigen::Index t = 0; t < t_total; ++t) out.loss -= s.logp(t, labels[t]);

  // Backward through time; dh carries the gradient w.r.t. h_t.
  Eigen::RowVectorXd dh = Eigen::RowVectorXd::Zero(params.hidden_dim());
  for (Eigen::Index t = t_total - 1; t >= 0; --t) {
    Eigen::RowVectorXd dout = s.logp.row(t).array().exp();
    dout(labels[t]) -= 1.0;
    g.out_proj.noalias() += s.h.row(t + 1).transpose() * dout;
    g.b_out += dout;
    dh.noalias() += dout * params.out_proj.transpose();

    const Eigen::RowVectorXd prev = s.h.row(t);
    const auto zt = s.z.row(t).array();
    const auto rt = s.r.row(t).array();
    const auto nt = s.n.row(t).array();

    const Eigen::RowVectorXd dn = (dh.array() * zt).matrix();
    const Eigen::RowVectorXd dz =
        (dh.array() * (nt - prev.array())).matrix();
    Eigen::RowVectorXd dprev = (dh.array() * (1.0 - zt)).matrix();

    const Eigen::RowVectorXd da_n = (dn.array() * (1.0 - nt * nt)).matrix();
    g.in_cand.noalias() += frames.row(t).transpose() * da_n;
    g.rec_cand.noalias() +=
        (rt * prev.array()).matrix().transpose() * da_n;
    g.b_cand += da_n;
    const Eigen::RowVectorXd dgate = da_n * params.rec_cand.transpose();
    const Eigen::RowVectorXd dr = (dgate.array() * prev.array()).matrix();
    dprev.array() += dgate.array() * rt;

    const Eigen::RowVectorXd da_z =
        (dz.array() * zt * (1.0 - zt)).matrix();
    g.in_update.noalias() += frames.row(t).transpose() * da_z;
    g.rec_update.noalias() += prev.transpose() * da_z;
    g.b_update += da_z;
    dprev.noalias() += da_z * params.rec_update.transpose();

    const Eigen::RowVectorXd da_r =
        (dr.array() * rt * (1.0 - rt)).matrix();
    g.in_reset.noalias() += frames.row(t).transpose() * da_r;
    g.rec_reset.noalias() += prev.transpose() * da_r;
    g.b_reset += da_r;
    dprev.noalias() += da_r * params.rec_reset.transpose();

    dh = dprev;
  }

  // Extra frames are independent length-1 sequences from a zero hidden
  // state: the reset gate multiplies a zero vector, so neither it nor the
  // recurrent matrices receive gradient, and h_1 = z . n.
  if (extra_frames.rows() > 0) {
    const Eigen::MatrixXd az =
        (extra_frames * params.in_update).rowwise() + params.b_update.row(0);
    const Eigen::ArrayXXd zg = 1.0 / (1.0 + (-az.array()).exp());
    const Eigen::MatrixXd an =
        (extra_frames * params.in_cand).rowwise() + params.b_cand.row(0);
    const Eigen::ArrayXXd ng = an.array().tanh();
    const Eigen::MatrixXd h1 = (zg * ng).matrix();
    const Eigen::MatrixXd logits =
        (h1 * params.out_proj).rowwise() + params.b_out.row(0);
    Eigen::MatrixXd dout(logits.rows(), logits.cols());
    for (Eigen::Index k = 0; k < logits.rows(); ++k) {
      const Eigen::RowVectorXd logp = log_softmax_row(logits.row(k));
      out.loss -= logp(extra_labels[k]);
      dout.row(k) = logp.array().exp();
      dout(k, extra_labels[k]) -= 1.0;
    }
    g.out_proj.noalias() += h1.transpose() * dout;
    g.b_out += dout.colwise().sum();
    const Eigen::MatrixXd dh1 = dout * params.out_proj.transpose();
    const Eigen::ArrayXXd da_n = dh1.array() * zg * (1.0 - ng * ng);
    g.in_cand.noalias() += extra_frames.transpose() * da_n.matrix();
    g.b_cand += da_n.colwise().sum().matrix();
    const Eigen::ArrayXXd da_z = dh1.array() * ng * zg * (1.0 - zg);
    g.in_update.noalias() += extra_frames.transpose() * da_z.matrix();
    g.b_update += da_z.colwise().sum().matrix();
  }
  return out;
}

LossGrad loss_and_gradient(const NetParams& params, const FrameSequence& frames,
                           std::span<const int> labels) {
  return loss_and_gradient(params, frames, labels,
                           FrameSequence(0, params.input_dim()), {},
                           Eigen::RowVectorXd::Zero(params.hidden_dim()));
}

double gradient_norm(const NetParams& grad) {
  return std::sqrt(grad.squared_norm());
}

void sgd_step(NetParams& params, const NetParams& grad, double lr,
              double clip_threshold) {
  if (lr <= 0.0) throw std::invalid_argument("learning rate must be > 0");
  if (!grad.all_finite())
    throw std::invalid_argument("refusing SGD step with non-finite gradient");
  const double norm = gradient_norm(grad);
  const double scale =
      (clip_threshold > 0.0 && norm > clip_threshold) ? clip_threshold / norm
                                                      : 1.0;
  for (auto member : NetParams::kTensors)
    params.*member -= (lr * scale) * (grad.*member);
}

}  // namespace nnviterbi
