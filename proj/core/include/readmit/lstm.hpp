#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "readmit/features.hpp"

namespace readmit {

// Gate parameters of one LSTM cell. Each weight matrix acts on the
// concatenation [h_prev; x_t] (hidden rows first).
struct LstmCellParams {
  Eigen::MatrixXd w_f, w_i, w_c, w_o;  // H x (H + D)
  Eigen::VectorXd b_f, b_i, b_c, b_o;  // H

  int hidden_size() const { return int(w_f.rows()); }
  int input_size() const { return int(w_f.cols() - w_f.rows()); }

  static LstmCellParams init(int input_dim, int hidden, std::mt19937_64& rng);
  static LstmCellParams zeros(int input_dim, int hidden);
};

// Activations retained by the forward pass for backpropagation through time.
struct CellStepCache {
  Eigen::MatrixXd z;        // (H+D) x B, [h_prev; x_t]
  Eigen::MatrixXd f, i, g, o;
  Eigen::MatrixXd tanh_c;   // tanh of the pre-mask cell state
  Eigen::MatrixXd c_prev;   // carried (post-mask) cell state entering the step
};

// One step of the cell over a batch of columns:
//   f = sigma(w_f z + b_f), i = sigma(w_i z + b_i), g = tanh(w_c z + b_c),
//   o = sigma(w_o z + b_o), c = f.c_prev + i.g, h = o.tanh(c).
void lstm_cell_forward(const LstmCellParams& params, const Eigen::MatrixXd& x_t,
                       const Eigen::MatrixXd& h_prev,
                       const Eigen::MatrixXd& c_prev, Eigen::MatrixXd& h_t,
                       Eigen::MatrixXd& c_t, CellStepCache* cache = nullptr);

// Padded batch of sequences: x[t] holds the feature columns of timestep t,
// mask(t, b) is 1 on real timesteps. Sequences are left-padded, so masks are
// non-decreasing in t and the final timestep is always real.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> x;  // T entries of D x B
  Eigen::MatrixXd mask;            // T x B
  Eigen::VectorXd labels;          // B, empty when only scoring

  int steps() const { return int(x.size()); }
  int batch_size() const { return x.empty() ? 0 : int(x[0].cols()); }
  int input_dim() const { return x.empty() ? 0 : int(x[0].rows()); }

  static SequenceBatch from_sequences(std::span<const LabeledSequence> seqs);
  static SequenceBatch from_indices(const std::vector<LabeledSequence>& seqs,
                                    std::span<const std::size_t> indices);
};

// Bidirectional LSTM layer -> LSTM layer -> dense sigmoid head, with
// inverted dropout on each LSTM layer's output sequence in train mode.
struct LstmNetwork {
  LstmCellParams fwd1, bwd1;  // bidirectional layer
  LstmCellParams cell2;       // second (unidirectional) layer
  Eigen::VectorXd w_out;      // H2
  double b_out = 0.0;
  double dropout_rate = 0.4;

  int input_dim() const { return fwd1.input_size(); }
  int hidden1() const { return fwd1.hidden_size(); }
  int hidden2() const { return cell2.hidden_size(); }

  static LstmNetwork init(int input_dim, int hidden1, int hidden2,
                          double dropout_rate, std::uint64_t seed);

  Eigen::Index parameter_count() const;
  Eigen::VectorXd to_vector() const;
  void from_vector(const Eigen::VectorXd& flat);
};

struct ForwardCache {
  bool valid = false;
  bool train_mode = false;
  std::vector<CellStepCache> fwd1_steps, bwd1_steps, cell2_steps;
  std::vector<Eigen::MatrixXd> layer1_out;  // post-mask, post-dropout
  std::vector<Eigen::MatrixXd> drop1, drop2;  // dropout multipliers
  Eigen::MatrixXd head_input;  // layer-2 output at the final timestep
  Eigen::VectorXd logits, probs;
};

// Probabilities per sequence. In train mode, dropout draws from `rng`
// (required when dropout_rate > 0); eval mode is a pure function of the
// inputs. Pass `cache` to retain activations for lstm_backward.
Eigen::VectorXd lstm_forward(const LstmNetwork& net, const SequenceBatch& batch,
                             bool train_mode, std::mt19937_64* rng = nullptr,
                             ForwardCache* cache = nullptr);

struct LstmGradients {
  LstmCellParams fwd1, bwd1, cell2;
  Eigen::VectorXd w_out;
  double b_out = 0.0;

  Eigen::VectorXd to_vector() const;
};

// Exact gradients of the mean binary cross-entropy of the batch with
// respect to every parameter. Requires the cache of a prior forward pass on
// the same batch and network.
LstmGradients lstm_backward(const LstmNetwork& net, const SequenceBatch& batch,
                            const ForwardCache& cache);

// Mean binary cross-entropy; probabilities are clamped to
// [1e-12, 1 - 1e-12] before the logs.
double bce_loss(const Eigen::VectorXd& labels, const Eigen::VectorXd& probs);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m, v;
  long step_count = 0;
  AdamConfig config;

  static AdamState init(Eigen::Index n_params, AdamConfig config = {});
};

// Bias-corrected Adam update, in place. Rejects non-finite gradients.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state);

// Scales grads so its 2-norm is at most max_norm; returns the pre-clip norm.
double clip_by_global_norm(Eigen::VectorXd& grads, double max_norm);

struct TrainConfig {
  int hidden1 = 32;
  int hidden2 = 32;
  double dropout = 0.4;
  int max_epochs = 100;
  int batch_size = 64;
  int patience = 5;           // epochs without validation improvement
  double val_fraction = 0.15; // carved from the training set by patient
  double learning_rate = 0.001;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;  // NaN when the validation side is single-class
};

struct TrainResult {
  LstmNetwork network;
  std::vector<EpochLog> log;
  int best_epoch = 0;        // 1-based epoch whose weights were restored
  double best_val_loss = 0.0;
  std::vector<std::string> warnings;
};

// Mini-batch Adam with early stopping on validation loss; restores the
// best-validation weights. Deterministic given (train_set, config).
TrainResult train_lstm(const std::vector<LabeledSequence>& train_set,
                       const TrainConfig& config);

// Eval-mode probabilities over any number of sequences, in chunks.
Eigen::VectorXd score_sequences(const LstmNetwork& net,
                                const std::vector<LabeledSequence>& seqs,
                                int chunk = 256);

// Versioned JSON checkpoint; round-trips parameters bit-exactly.
struct LstmCheckpoint {
  LstmNetwork network;
  FeatureRegistry registry;
  int max_seq_len = 10;
  TrainConfig train_config;
  int best_epoch = 0;
  double best_val_loss = 0.0;

  void save(const std::filesystem::path& file) const;
  static LstmCheckpoint load(const std::filesystem::path& file);
  std::string to_json_string() const;
  static LstmCheckpoint from_json_string(const std::string& text);
};

}  // namespace readmit
