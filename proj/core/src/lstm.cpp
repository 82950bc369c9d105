#include "readmit/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "readmit/errors.hpp"
#include "readmit/mathutil.hpp"
#include "readmit/metrics.hpp"
#include "readmit/rng.hpp"
#include "json_util.hpp"

namespace readmit {

namespace {

Eigen::MatrixXd sigmoid_mat(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double v) { return sigmoid(v); });
}

void fill_uniform(Eigen::MatrixXd& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
}

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

}  // namespace

LstmCellParams LstmCellParams::init(int input_dim, int hidden,
                                    std::mt19937_64& rng) {
  if (input_dim < 1 || hidden < 1) {
    throw ValidationError("LSTM cell sizes must be positive");
  }
  LstmCellParams p = zeros(input_dim, hidden);
  const double bound = 1.0 / std::sqrt(double(hidden + input_dim));
  fill_uniform(p.w_f, bound, rng);
  fill_uniform(p.w_i, bound, rng);
  fill_uniform(p.w_c, bound, rng);
  fill_uniform(p.w_o, bound, rng);
  p.b_f.setConstant(1.0);  // open forget gates at the start of training
  return p;
}

LstmCellParams LstmCellParams::zeros(int input_dim, int hidden) {
  LstmCellParams p;
  p.w_f = Eigen::MatrixXd::Zero(hidden, hidden + input_dim);
  p.w_i = p.w_f;
  p.w_c = p.w_f;
  p.w_o = p.w_f;
  p.b_f = Eigen::VectorXd::Zero(hidden);
  p.b_i = p.b_f;
  p.b_c = p.b_f;
  p.b_o = p.b_f;
  return p;
}

void lstm_cell_forward(const LstmCellParams& params, const Eigen::MatrixXd& x_t,
                       const Eigen::MatrixXd& h_prev,
                       const Eigen::MatrixXd& c_prev, Eigen::MatrixXd& h_t,
                       Eigen::MatrixXd& c_t, CellStepCache* cache) {
  const int H = params.hidden_size();
  const int D = params.input_size();
  const Eigen::Index B = x_t.cols();
  if (x_t.rows() != D || h_prev.rows() != H || c_prev.rows() != H ||
      h_prev.cols() != B || c_prev.cols() != B) {
    throw ValidationError(
        "lstm_cell_forward: shape mismatch (D=" + std::to_string(D) +
        ", H=" + std::to_string(H) + ", got x " + std::to_string(x_t.rows()) +
        "x" + std::to_string(x_t.cols()) + ", h " +
        std::to_string(h_prev.rows()) + "x" + std::to_string(h_prev.cols()) +
        ")");
  }

  Eigen::MatrixXd z(H + D, B);
  z.topRows(H) = h_prev;
  z.bottomRows(D) = x_t;

  Eigen::MatrixXd f = sigmoid_mat((params.w_f * z).colwise() + params.b_f);
  Eigen::MatrixXd i = sigmoid_mat((params.w_i * z).colwise() + params.b_i);
  Eigen::MatrixXd g =
      ((params.w_c * z).colwise() + params.b_c).array().tanh().matrix();
  Eigen::MatrixXd o = sigmoid_mat((params.w_o * z).colwise() + params.b_o);

  c_t = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  Eigen::MatrixXd tanh_c = c_t.array().tanh().matrix();
  h_t = (o.array() * tanh_c.array()).matrix();

  if (cache) {
    cache->z = std::move(z);
    cache->f = std::move(f);
    cache->i = std::move(i);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->tanh_c = std::move(tanh_c);
    cache->c_prev = c_prev;
  }
}

SequenceBatch SequenceBatch::from_sequences(
    std::span<const LabeledSequence> seqs) {
  SequenceBatch batch;
  if (seqs.empty()) throw ValidationError("empty sequence batch");
  const Eigen::Index T = seqs[0].x.rows();
  const Eigen::Index D = seqs[0].x.cols();
  const Eigen::Index B = static_cast<Eigen::Index>(seqs.size());

  batch.x.assign(std::size_t(T), Eigen::MatrixXd(D, B));
  batch.mask.resize(T, B);
  batch.labels.resize(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const LabeledSequence& s = seqs[std::size_t(b)];
    if (s.x.rows() != T || s.x.cols() != D || s.mask.size() != T) {
      throw ValidationError("sequence " + s.index_admission_id +
                            " has inconsistent shape within the batch");
    }
    double prev = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double m = s.mask[t];
      if (m != 0.0 && m != 1.0) {
        throw ValidationError("sequence " + s.index_admission_id +
                              ": mask entries must be 0 or 1");
      }
      if (m < prev) {
        throw ValidationError("sequence " + s.index_admission_id +
                              ": mask is not left-padded");
      }
      prev = m;
      batch.x[std::size_t(t)].col(b) = s.x.row(t).transpose();
      batch.mask(t, b) = m;
    }
    if (s.mask[T - 1] != 1.0) {
      throw ValidationError("sequence " + s.index_admission_id +
                            " is entirely masked");
    }
    batch.labels[b] = s.label ? 1.0 : 0.0;
  }
  return batch;
}

SequenceBatch SequenceBatch::from_indices(
    const std::vector<LabeledSequence>& seqs,
    std::span<const std::size_t> indices) {
  std::vector<LabeledSequence> subset;
  subset.reserve(indices.size());
  for (std::size_t idx : indices) subset.push_back(seqs.at(idx));
  return from_sequences(subset);
}

LstmNetwork LstmNetwork::init(int input_dim, int hidden1, int hidden2,
                              double dropout_rate, std::uint64_t seed) {
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ValidationError("dropout_rate must lie in [0, 1)");
  }
  std::mt19937_64 rng{derive_seed(seed, 0xd15c0)};
  LstmNetwork net;
  net.fwd1 = LstmCellParams::init(input_dim, hidden1, rng);
  net.bwd1 = LstmCellParams::init(input_dim, hidden1, rng);
  net.cell2 = LstmCellParams::init(2 * hidden1, hidden2, rng);
  net.w_out.resize(hidden2);
  {
    Eigen::MatrixXd tmp(hidden2, 1);
    fill_uniform(tmp, 1.0 / std::sqrt(double(hidden2)), rng);
    net.w_out = tmp.col(0);
  }
  net.b_out = 0.0;
  net.dropout_rate = dropout_rate;
  return net;
}

namespace {

template <typename Fn>
void visit_cell(const LstmCellParams& p, Fn&& fn) {
  fn(p.w_f); fn(p.w_i); fn(p.w_c); fn(p.w_o);
  fn(p.b_f); fn(p.b_i); fn(p.b_c); fn(p.b_o);
}

template <typename Fn>
void visit_cell(LstmCellParams& p, Fn&& fn) {
  fn(p.w_f); fn(p.w_i); fn(p.w_c); fn(p.w_o);
  fn(p.b_f); fn(p.b_i); fn(p.b_c); fn(p.b_o);
}

Eigen::Index cell_param_count(const LstmCellParams& p) {
  Eigen::Index n = 0;
  visit_cell(p, [&](const auto& m) { n += m.size(); });
  return n;
}

void flatten_cell(const LstmCellParams& p, Eigen::VectorXd& out,
                  Eigen::Index& off) {
  visit_cell(p, [&](const auto& m) {
    std::copy(m.data(), m.data() + m.size(), out.data() + off);
    off += m.size();
  });
}

void unflatten_cell(LstmCellParams& p, const Eigen::VectorXd& in,
                    Eigen::Index& off) {
  visit_cell(p, [&](auto& m) {
    std::copy(in.data() + off, in.data() + off + m.size(), m.data());
    off += m.size();
  });
}

}  // namespace

Eigen::Index LstmNetwork::parameter_count() const {
  return cell_param_count(fwd1) + cell_param_count(bwd1) +
         cell_param_count(cell2) + w_out.size() + 1;
}

Eigen::VectorXd LstmNetwork::to_vector() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index off = 0;
  flatten_cell(fwd1, flat, off);
  flatten_cell(bwd1, flat, off);
  flatten_cell(cell2, flat, off);
  std::copy(w_out.data(), w_out.data() + w_out.size(), flat.data() + off);
  off += w_out.size();
  flat[off] = b_out;
  return flat;
}

void LstmNetwork::from_vector(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw ValidationError("parameter vector size mismatch: expected " +
                          std::to_string(parameter_count()) + ", got " +
                          std::to_string(flat.size()));
  }
  Eigen::Index off = 0;
  unflatten_cell(fwd1, flat, off);
  unflatten_cell(bwd1, flat, off);
  unflatten_cell(cell2, flat, off);
  std::copy(flat.data() + off, flat.data() + off + w_out.size(), w_out.data());
  off += w_out.size();
  b_out = flat[off];
}

Eigen::VectorXd LstmGradients::to_vector() const {
  LstmNetwork shell;
  shell.fwd1 = fwd1;
  shell.bwd1 = bwd1;
  shell.cell2 = cell2;
  shell.w_out = w_out;
  shell.b_out = b_out;
  return shell.to_vector();
}

namespace {

// Runs one direction of one layer over the padded batch. Carried state skips
// masked steps; outputs are zeroed there.
void run_direction(const LstmCellParams& params,
                   const std::vector<Eigen::MatrixXd>& inputs,
                   const Eigen::MatrixXd& mask, bool reverse,
                   std::vector<Eigen::MatrixXd>& outputs,
                   std::vector<CellStepCache>* caches) {
  const int T = int(inputs.size());
  const int H = params.hidden_size();
  const Eigen::Index B = inputs[0].cols();

  outputs.assign(std::size_t(T), Eigen::MatrixXd());
  if (caches) caches->assign(std::size_t(T), CellStepCache{});

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd h_new, c_new;
  for (int k = 0; k < T; ++k) {
    const int t = reverse ? T - 1 - k : k;
    const RowArray m = mask.row(t).array();
    lstm_cell_forward(params, inputs[std::size_t(t)], h, c, h_new, c_new,
                      caches ? &(*caches)[std::size_t(t)] : nullptr);
    outputs[std::size_t(t)] = (h_new.array().rowwise() * m).matrix();
    h = (h_new.array().rowwise() * m + h.array().rowwise() * (1.0 - m)).matrix();
    c = (c_new.array().rowwise() * m + c.array().rowwise() * (1.0 - m)).matrix();
  }
}

// Mirror of run_direction. d_outputs[t] is the gradient arriving at the
// (zeroed) per-step output; d_inputs, when present, accumulates gradients
// w.r.t. the layer inputs.
void run_direction_backward(const LstmCellParams& params,
                            const std::vector<CellStepCache>& caches,
                            const std::vector<Eigen::MatrixXd>& d_outputs,
                            const Eigen::MatrixXd& mask, bool reverse,
                            LstmCellParams& grads,
                            std::vector<Eigen::MatrixXd>* d_inputs) {
  const int T = int(caches.size());
  const int H = params.hidden_size();
  const Eigen::Index B = mask.cols();

  Eigen::MatrixXd dh_state = Eigen::MatrixXd::Zero(H, B);
  Eigen::MatrixXd dc_state = Eigen::MatrixXd::Zero(H, B);

  for (int k = T - 1; k >= 0; --k) {
    const int t = reverse ? T - 1 - k : k;
    const CellStepCache& s = caches[std::size_t(t)];
    const RowArray m = mask.row(t).array();

    Eigen::ArrayXXd dh_new =
        d_outputs[std::size_t(t)].array().rowwise() * m +
        dh_state.array().rowwise() * m;
    Eigen::ArrayXXd dc_new = dc_state.array().rowwise() * m;
    Eigen::ArrayXXd dh_carry = dh_state.array().rowwise() * (1.0 - m);
    Eigen::ArrayXXd dc_carry = dc_state.array().rowwise() * (1.0 - m);

    Eigen::ArrayXXd d_o = dh_new * s.tanh_c.array();
    Eigen::ArrayXXd dc_pre =
        dh_new * s.o.array() * (1.0 - s.tanh_c.array().square()) + dc_new;
    Eigen::ArrayXXd d_f = dc_pre * s.c_prev.array();
    Eigen::ArrayXXd d_i = dc_pre * s.g.array();
    Eigen::ArrayXXd d_g = dc_pre * s.i.array();
    Eigen::MatrixXd dc_prev_cell = (dc_pre * s.f.array()).matrix();

    Eigen::MatrixXd da_f = (d_f * s.f.array() * (1.0 - s.f.array())).matrix();
    Eigen::MatrixXd da_i = (d_i * s.i.array() * (1.0 - s.i.array())).matrix();
    Eigen::MatrixXd da_o = (d_o * s.o.array() * (1.0 - s.o.array())).matrix();
    Eigen::MatrixXd da_g = (d_g * (1.0 - s.g.array().square())).matrix();

    grads.w_f.noalias() += da_f * s.z.transpose();
    grads.w_i.noalias() += da_i * s.z.transpose();
    grads.w_c.noalias() += da_g * s.z.transpose();
    grads.w_o.noalias() += da_o * s.z.transpose();
    grads.b_f += da_f.rowwise().sum();
    grads.b_i += da_i.rowwise().sum();
    grads.b_c += da_g.rowwise().sum();
    grads.b_o += da_o.rowwise().sum();

    Eigen::MatrixXd dz = params.w_f.transpose() * da_f;
    dz.noalias() += params.w_i.transpose() * da_i;
    dz.noalias() += params.w_c.transpose() * da_g;
    dz.noalias() += params.w_o.transpose() * da_o;

    dh_state = dz.topRows(H) + dh_carry.matrix();
    dc_state = dc_prev_cell + dc_carry.matrix();
    if (d_inputs) {
      (*d_inputs)[std::size_t(t)] += dz.bottomRows(dz.rows() - H);
    }
  }
}

Eigen::MatrixXd draw_dropout(Eigen::Index rows, Eigen::Index cols, double rate,
                             std::mt19937_64& rng) {
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    m.data()[k] = unit(rng) < keep ? 1.0 / keep : 0.0;
  }
  return m;
}

}  // namespace

Eigen::VectorXd lstm_forward(const LstmNetwork& net, const SequenceBatch& batch,
                             bool train_mode, std::mt19937_64* rng,
                             ForwardCache* cache) {
  const int T = batch.steps();
  const Eigen::Index B = batch.batch_size();
  if (T == 0 || B == 0) throw ValidationError("lstm_forward: empty batch");
  if (batch.input_dim() != net.input_dim()) {
    throw ValidationError("lstm_forward: batch input dim " +
                          std::to_string(batch.input_dim()) +
                          " does not match network input dim " +
                          std::to_string(net.input_dim()));
  }
  for (Eigen::Index b = 0; b < B; ++b) {
    if (batch.mask(T - 1, b) != 1.0) {
      throw ValidationError("lstm_forward: sequence " + std::to_string(b) +
                            " in batch is entirely masked");
    }
  }
  const bool use_dropout = train_mode && net.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr) {
    throw ValidationError("lstm_forward: train mode with dropout needs an rng");
  }

  const int H1 = net.hidden1();
  const int H2 = net.hidden2();

  std::vector<Eigen::MatrixXd> out_fwd, out_bwd;
  run_direction(net.fwd1, batch.x, batch.mask, /*reverse=*/false, out_fwd,
                cache ? &cache->fwd1_steps : nullptr);
  run_direction(net.bwd1, batch.x, batch.mask, /*reverse=*/true, out_bwd,
                cache ? &cache->bwd1_steps : nullptr);

  std::vector<Eigen::MatrixXd> layer1(static_cast<std::size_t>(T));
  if (cache) cache->drop1.assign(std::size_t(T), Eigen::MatrixXd());
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd concat(2 * H1, B);
    concat.topRows(H1) = out_fwd[std::size_t(t)];
    concat.bottomRows(H1) = out_bwd[std::size_t(t)];
    if (use_dropout) {
      Eigen::MatrixXd mult = draw_dropout(2 * H1, B, net.dropout_rate, *rng);
      concat.array() *= mult.array();
      if (cache) cache->drop1[std::size_t(t)] = std::move(mult);
    }
    layer1[std::size_t(t)] = std::move(concat);
  }

  std::vector<Eigen::MatrixXd> out2;
  run_direction(net.cell2, layer1, batch.mask, /*reverse=*/false, out2,
                cache ? &cache->cell2_steps : nullptr);
  if (cache) cache->drop2.assign(std::size_t(T), Eigen::MatrixXd());
  if (use_dropout) {
    for (int t = 0; t < T; ++t) {
      Eigen::MatrixXd mult = draw_dropout(H2, B, net.dropout_rate, *rng);
      out2[std::size_t(t)].array() *= mult.array();
      if (cache) cache->drop2[std::size_t(t)] = std::move(mult);
    }
  }

  // Left padding guarantees the final timestep is the last unmasked one.
  Eigen::MatrixXd head_input = out2[std::size_t(T - 1)];
  Eigen::VectorXd logits =
      (net.w_out.transpose() * head_input).transpose().col(0);
  logits.array() += net.b_out;
  Eigen::VectorXd probs = logits.unaryExpr([](double v) { return sigmoid(v); });

  if (cache) {
    cache->valid = true;
    cache->train_mode = train_mode;
    cache->layer1_out = std::move(layer1);
    cache->head_input = std::move(head_input);
    cache->logits = logits;
    cache->probs = probs;
  }
  return probs;
}

LstmGradients lstm_backward(const LstmNetwork& net, const SequenceBatch& batch,
                            const ForwardCache& cache) {
  if (!cache.valid) {
    throw ValidationError("lstm_backward: forward cache is missing or stale");
  }
  if (batch.labels.size() != cache.probs.size()) {
    throw ValidationError("lstm_backward: batch has no labels");
  }
  const int T = batch.steps();
  const Eigen::Index B = batch.batch_size();
  const int H1 = net.hidden1();
  const bool used_dropout = cache.train_mode && net.dropout_rate > 0.0 &&
                            !cache.drop1.empty() &&
                            cache.drop1[0].size() != 0;

  LstmGradients grads;
  grads.fwd1 = LstmCellParams::zeros(net.fwd1.input_size(), H1);
  grads.bwd1 = LstmCellParams::zeros(net.bwd1.input_size(), H1);
  grads.cell2 = LstmCellParams::zeros(net.cell2.input_size(), net.hidden2());
  grads.w_out = Eigen::VectorXd::Zero(net.w_out.size());

  // Mean BCE through the sigmoid head.
  Eigen::VectorXd dlogits = (cache.probs - batch.labels) / double(B);
  grads.w_out = cache.head_input * dlogits;
  grads.b_out = dlogits.sum();
  Eigen::MatrixXd d_head = net.w_out * dlogits.transpose();  // H2 x B

  std::vector<Eigen::MatrixXd> d_out2(
      std::size_t(T), Eigen::MatrixXd::Zero(net.hidden2(), B));
  d_out2[std::size_t(T - 1)] = d_head;
  if (used_dropout) {
    for (int t = 0; t < T; ++t) {
      d_out2[std::size_t(t)].array() *= cache.drop2[std::size_t(t)].array();
    }
  }

  std::vector<Eigen::MatrixXd> d_layer1(
      std::size_t(T), Eigen::MatrixXd::Zero(2 * H1, B));
  run_direction_backward(net.cell2, cache.cell2_steps, d_out2, batch.mask,
                         /*reverse=*/false, grads.cell2, &d_layer1);

  std::vector<Eigen::MatrixXd> d_fwd, d_bwd;
  d_fwd.resize(std::size_t(T));
  d_bwd.resize(std::size_t(T));
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd d_concat = d_layer1[std::size_t(t)];
    if (used_dropout) {
      d_concat.array() *= cache.drop1[std::size_t(t)].array();
    }
    d_fwd[std::size_t(t)] = d_concat.topRows(H1);
    d_bwd[std::size_t(t)] = d_concat.bottomRows(H1);
  }
  run_direction_backward(net.fwd1, cache.fwd1_steps, d_fwd, batch.mask,
                         /*reverse=*/false, grads.fwd1, nullptr);
  run_direction_backward(net.bwd1, cache.bwd1_steps, d_bwd, batch.mask,
                         /*reverse=*/true, grads.bwd1, nullptr);
  return grads;
}

double bce_loss(const Eigen::VectorXd& labels, const Eigen::VectorXd& probs) {
  if (labels.size() == 0) throw ValidationError("bce_loss: empty batch");
  if (labels.size() != probs.size()) {
    throw ValidationError("bce_loss: labels/probabilities length mismatch");
  }
  constexpr double kClamp = 1e-12;
  double total = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs[i], kClamp, 1.0 - kClamp);
    total += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return -total / double(labels.size());
}

AdamState AdamState::init(Eigen::Index n_params, AdamConfig config) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n_params);
  s.v = Eigen::VectorXd::Zero(n_params);
  s.step_count = 0;
  s.config = config;
  return s;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ValidationError("adam_step: shape mismatch");
  }
  if (!grads.allFinite()) {
    Eigen::Index bad = 0;
    for (Eigen::Index i = 0; i < grads.size(); ++i) {
      if (!std::isfinite(grads[i])) { bad = i; break; }
    }
    throw ComputeError("adam_step: non-finite gradient at parameter index " +
                       std::to_string(bad) + " on step " +
                       std::to_string(state.step_count + 1));
  }
  const AdamConfig& c = state.config;
  state.step_count += 1;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
  state.v = c.beta2 * state.v.array().matrix() +
            (1.0 - c.beta2) * grads.array().square().matrix();
  const double bias1 = 1.0 - std::pow(c.beta1, double(state.step_count));
  const double bias2 = 1.0 - std::pow(c.beta2, double(state.step_count));
  Eigen::ArrayXd m_hat = state.m.array() / bias1;
  Eigen::ArrayXd v_hat = state.v.array() / bias2;
  params.array() -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
}

double clip_by_global_norm(Eigen::VectorXd& grads, double max_norm) {
  const double norm = grads.norm();
  if (max_norm > 0.0 && norm > max_norm) {
    grads *= max_norm / norm;
  }
  return norm;
}

namespace {

void validate_train_config(const TrainConfig& c) {
  if (c.hidden1 < 1 || c.hidden2 < 1 || c.max_epochs < 1 || c.batch_size < 1 ||
      c.patience < 1 || c.learning_rate <= 0.0) {
    throw ValidationError("train config: all sizes and rates must be positive");
  }
  if (c.patience > c.max_epochs) {
    throw ValidationError("train config: patience exceeds max_epochs");
  }
  if (c.val_fraction < 0.0 || c.val_fraction >= 1.0) {
    throw ValidationError("train config: val_fraction must lie in [0, 1)");
  }
  if (c.dropout < 0.0 || c.dropout >= 1.0) {
    throw ValidationError("train config: dropout must lie in [0, 1)");
  }
}

}  // namespace

TrainResult train_lstm(const std::vector<LabeledSequence>& train_set,
                       const TrainConfig& config) {
  validate_train_config(config);
  if (train_set.empty()) {
    throw ValidationError("train_lstm: empty training set");
  }
  {
    bool any_pos = false, any_neg = false;
    for (const auto& s : train_set) (s.label ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg) {
      throw ValidationError(
          "train_lstm: training data contain a single class only");
    }
  }

  // Patient-level validation carve, in first-appearance order.
  std::vector<std::string> patients;
  for (const auto& s : train_set) {
    if (patients.empty() || patients.back() != s.patient_id) {
      if (std::find(patients.begin(), patients.end(), s.patient_id) ==
          patients.end()) {
        patients.push_back(s.patient_id);
      }
    }
  }
  std::mt19937_64 split_rng{derive_seed(config.seed, 17)};
  std::vector<std::string> shuffled = patients;
  std::shuffle(shuffled.begin(), shuffled.end(), split_rng);

  TrainResult result;
  std::size_t n_val_patients = 0;
  if (config.val_fraction > 0.0 && patients.size() >= 2) {
    n_val_patients = std::clamp<std::size_t>(
        std::size_t(std::llround(config.val_fraction * double(patients.size()))),
        1, patients.size() - 1);
  } else {
    result.warnings.push_back(
        "validation set falls back to the training set (too few patients or "
        "val_fraction 0); early stopping will track training loss");
  }
  std::set<std::string> val_patients(shuffled.begin(),
                                     shuffled.begin() + long(n_val_patients));

  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (val_patients.count(train_set[i].patient_id)) {
      val_idx.push_back(i);
    } else {
      train_idx.push_back(i);
    }
  }
  if (val_idx.empty()) val_idx = train_idx;
  {
    bool any_pos = false, any_neg = false;
    for (std::size_t i : train_idx) {
      (train_set[i].label ? any_pos : any_neg) = true;
    }
    if (!any_pos || !any_neg) {
      throw ValidationError(
          "train_lstm: optimizer partition is single-class after the "
          "validation carve; provide more data or lower val_fraction");
    }
  }

  const int input_dim = int(train_set[0].x.cols());
  LstmNetwork net = LstmNetwork::init(input_dim, config.hidden1, config.hidden2,
                                      config.dropout,
                                      derive_seed(config.seed, 23));
  std::mt19937_64 run_rng{derive_seed(config.seed, 31)};

  Eigen::VectorXd flat = net.to_vector();
  AdamState adam = AdamState::init(flat.size(), {config.learning_rate});

  SequenceBatch val_batch = SequenceBatch::from_indices(train_set, val_idx);

  Eigen::VectorXd best_params = flat;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epochs_without_improvement = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), run_rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += std::size_t(config.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + std::size_t(config.batch_size));
      SequenceBatch batch = SequenceBatch::from_indices(
          train_set, std::span(train_idx).subspan(start, end - start));
      ForwardCache fwd;
      Eigen::VectorXd probs =
          lstm_forward(net, batch, /*train_mode=*/true, &run_rng, &fwd);
      loss_sum += bce_loss(batch.labels, probs) * double(end - start);
      seen += end - start;

      LstmGradients grads = lstm_backward(net, batch, fwd);
      Eigen::VectorXd g = grads.to_vector();
      clip_by_global_norm(g, config.clip_norm);
      adam_step(flat, g, adam);
      net.from_vector(flat);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / double(seen);
    Eigen::VectorXd val_probs =
        lstm_forward(net, val_batch, /*train_mode=*/false, nullptr, nullptr);
    log.val_loss = bce_loss(val_batch.labels, val_probs);
    {
      std::vector<double> scores(val_probs.data(),
                                 val_probs.data() + val_probs.size());
      std::vector<int> labels(val_batch.labels.size());
      for (Eigen::Index i = 0; i < val_batch.labels.size(); ++i) {
        labels[std::size_t(i)] = val_batch.labels[i] > 0.5 ? 1 : 0;
      }
      bool pos = false, neg = false;
      for (int l : labels) (l ? pos : neg) = true;
      log.val_auc = (pos && neg)
                        ? auc_roc(scores, labels)
                        : std::numeric_limits<double>::quiet_NaN();
    }
    result.log.push_back(log);

    if (log.val_loss < best_val_loss) {
      best_val_loss = log.val_loss;
      best_epoch = epoch;
      best_params = flat;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.patience) break;
    }
  }

  net.from_vector(best_params);
  result.network = std::move(net);
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val_loss;
  return result;
}

Eigen::VectorXd score_sequences(const LstmNetwork& net,
                                const std::vector<LabeledSequence>& seqs,
                                int chunk) {
  if (chunk < 1) throw ValidationError("score_sequences: chunk must be >= 1");
  Eigen::VectorXd out(static_cast<Eigen::Index>(seqs.size()));
  std::size_t pos = 0;
  while (pos < seqs.size()) {
    const std::size_t end = std::min(seqs.size(), pos + std::size_t(chunk));
    SequenceBatch batch = SequenceBatch::from_sequences(
        std::span(seqs).subspan(pos, end - pos));
    Eigen::VectorXd probs =
        lstm_forward(net, batch, /*train_mode=*/false, nullptr, nullptr);
    out.segment(long(pos), long(end - pos)) = probs;
    pos = end;
  }
  return out;
}

namespace {

nlohmann::json cell_to_json(const LstmCellParams& p) {
  return {
      {"w_f", detail::matrix_to_json(p.w_f)},
      {"w_i", detail::matrix_to_json(p.w_i)},
      {"w_c", detail::matrix_to_json(p.w_c)},
      {"w_o", detail::matrix_to_json(p.w_o)},
      {"b_f", detail::vector_to_json(p.b_f)},
      {"b_i", detail::vector_to_json(p.b_i)},
      {"b_c", detail::vector_to_json(p.b_c)},
      {"b_o", detail::vector_to_json(p.b_o)},
  };
}

LstmCellParams cell_from_json(const nlohmann::json& doc) {
  LstmCellParams p;
  p.w_f = detail::matrix_from_json(doc.at("w_f"));
  p.w_i = detail::matrix_from_json(doc.at("w_i"));
  p.w_c = detail::matrix_from_json(doc.at("w_c"));
  p.w_o = detail::matrix_from_json(doc.at("w_o"));
  p.b_f = detail::vector_from_json(doc.at("b_f"));
  p.b_i = detail::vector_from_json(doc.at("b_i"));
  p.b_c = detail::vector_from_json(doc.at("b_c"));
  p.b_o = detail::vector_from_json(doc.at("b_o"));
  return p;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {
      {"hidden1", c.hidden1},
      {"hidden2", c.hidden2},
      {"dropout", c.dropout},
      {"max_epochs", c.max_epochs},
      {"batch_size", c.batch_size},
      {"patience", c.patience},
      {"val_fraction", c.val_fraction},
      {"learning_rate", c.learning_rate},
      {"clip_norm", c.clip_norm},
      {"seed", c.seed},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.hidden1 = doc.value("hidden1", c.hidden1);
  c.hidden2 = doc.value("hidden2", c.hidden2);
  c.dropout = doc.value("dropout", c.dropout);
  c.max_epochs = doc.value("max_epochs", c.max_epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.patience = doc.value("patience", c.patience);
  c.val_fraction = doc.value("val_fraction", c.val_fraction);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.clip_norm = doc.value("clip_norm", c.clip_norm);
  c.seed = doc.value("seed", c.seed);
  return c;
}

}  // namespace

std::string LstmCheckpoint::to_json_string() const {
  char hash_hex[19];
  std::snprintf(hash_hex, sizeof(hash_hex), "0x%016llx",
                static_cast<unsigned long long>(registry.schema_hash()));
  nlohmann::json doc = {
      {"schema_version", 1},
      {"kind", "lstm"},
      {"registry", detail::registry_to_json(registry)},
      {"registry_hash", hash_hex},
      {"arch",
       {{"input_dim", network.input_dim()},
        {"hidden1", network.hidden1()},
        {"hidden2", network.hidden2()},
        {"dropout_rate", network.dropout_rate}}},
      {"max_seq_len", max_seq_len},
      {"params",
       {{"fwd1", cell_to_json(network.fwd1)},
        {"bwd1", cell_to_json(network.bwd1)},
        {"cell2", cell_to_json(network.cell2)},
        {"w_out", detail::vector_to_json(network.w_out)},
        {"b_out", network.b_out}}},
      {"training", train_config_to_json(train_config)},
      {"summary",
       {{"best_epoch", best_epoch}, {"best_val_loss", best_val_loss}}},
  };
  return doc.dump(2);
}

LstmCheckpoint LstmCheckpoint::from_json_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
  if (doc.value("schema_version", 1) != 1 || doc.value("kind", "") != "lstm") {
    throw ValidationError("not an lstm checkpoint document");
  }
  LstmCheckpoint ckpt;
  ckpt.registry = detail::registry_from_json(doc.at("registry"));
  ckpt.max_seq_len = doc.at("max_seq_len").get<int>();
  const auto& params = doc.at("params");
  ckpt.network.fwd1 = cell_from_json(params.at("fwd1"));
  ckpt.network.bwd1 = cell_from_json(params.at("bwd1"));
  ckpt.network.cell2 = cell_from_json(params.at("cell2"));
  ckpt.network.w_out = detail::vector_from_json(params.at("w_out"));
  ckpt.network.b_out = params.at("b_out").get<double>();
  ckpt.network.dropout_rate = doc.at("arch").at("dropout_rate").get<double>();
  ckpt.train_config = train_config_from_json(doc.at("training"));
  ckpt.best_epoch = doc.at("summary").at("best_epoch").get<int>();
  ckpt.best_val_loss = doc.at("summary").at("best_val_loss").get<double>();
  if (ckpt.network.input_dim() != int(ckpt.registry.size())) {
    throw ValidationError(
        "checkpoint: network input dim does not match registry arity");
  }
  return ckpt;
}

void LstmCheckpoint::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + file.string());
  out << to_json_string() << '\n';
}

LstmCheckpoint LstmCheckpoint::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open checkpoint: " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace readmit
