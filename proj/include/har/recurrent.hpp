#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "har/data.hpp"
#include "har/numkit.hpp"

namespace har {

enum class CellType { Rnn, Lstm, Gru };

struct CellKind {
  CellType type = CellType::Gru;
  bool bidirectional = false;

  /// RNN 1, GRU 3 (update, reset, candidate), LSTM 4 (input, forget, cell, output).
  std::size_t gates() const noexcept;
  std::size_t directions() const noexcept { return bidirectional ? 2 : 1; }
  bool operator==(const CellKind&) const = default;
};

/// "rnn", "lstm", "gru", "bilstm".
std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view name);

struct RecurrentShape {
  std::size_t input = kChannels;
  std::size_t hidden = 32;
  std::size_t classes = kNumClasses;
  bool operator==(const RecurrentShape&) const = default;
};

/// Closed form: directions * gates * (hidden * (hidden + input) + hidden)
///              + classes * directions * hidden + classes.
std::size_t count_params(CellKind kind, std::size_t hidden = 32, std::size_t input = kChannels,
                         std::size_t classes = kNumClasses);

/// Weights of one gate: W_x (hidden x input), W_h (hidden x hidden), one bias.
struct GateWeights {
  std::span<const double> wx;
  std::span<const double> wh;
  std::span<const double> bias;
};

/// Read-only view of one direction's cell weights.
struct CellWeights {
  CellType type = CellType::Gru;
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::vector<GateWeights> gates;
};

/// Flat parameter vector. Layout, per direction (forward first): for each
/// gate, W_x then W_h then bias; after all directions, dense W (classes x
/// directions*hidden) then dense bias.
class RecurrentModel {
 public:
  RecurrentModel() = default;
  RecurrentModel(CellKind kind, RecurrentShape shape);

  CellKind kind() const noexcept { return kind_; }
  const RecurrentShape& shape() const noexcept { return shape_; }
  std::size_t feature_width() const noexcept { return kind_.directions() * shape_.hidden; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::size_t gate_offset(std::size_t direction, std::size_t gate) const;
  std::size_t dense_weight_offset() const;
  std::size_t dense_bias_offset() const;
  CellWeights cell(std::size_t direction) const;

  /// Per-channel input normalization; empty means raw inputs.
  std::vector<double> input_mean;
  std::vector<double> input_std;

  bool operator==(const RecurrentModel&) const = default;

 private:
  CellKind kind_{};
  RecurrentShape shape_{};
  std::vector<double> params_;
};

/// Xavier-uniform gate and dense weights, zero biases except LSTM forget gate (1).
RecurrentModel init_model(CellKind kind, RecurrentShape shape, Rng& rng);

struct CellState {
  std::vector<double> h;
  std::vector<double> c;  // LSTM only
};

/// One step. LSTM requires c_prev; the other kinds ignore it.
CellState cell_forward(const CellWeights& weights, std::span<const double> x,
                       std::span<const double> h_prev, std::span<const double> c_prev = {});

/// window: input x steps (channel-major, as InertialWindow). dropout_mask, when
/// given, multiplies the final hidden features (length directions*hidden).
std::vector<double> sequence_forward(const RecurrentModel& model, const Matrix& window,
                                     std::span<const double> dropout_mask = {});

/// Final hidden state of each direction after unrolling (forward, then backward).
std::vector<std::vector<double>> final_states(const RecurrentModel& model, const Matrix& window);

struct BatchGradient {
  double loss = 0.0;                // mean cross-entropy
  std::vector<double> grad;         // same layout as params
  double global_norm = 0.0;         // after clipping
  double unclipped_norm = 0.0;
};

/// Exact BPTT gradient of the mean cross-entropy. masks[i] (optional) is the
/// dropout multiplier vector for example i. Throws NonFiniteGradient.
BatchGradient loss_and_gradient(const RecurrentModel& model, std::span<const Matrix> windows,
                                std::span<const int> labels,
                                std::span<const std::vector<double>> masks = {});

/// Mean cross-entropy only (for finite-difference checks).
double batch_loss(const RecurrentModel& model, std::span<const Matrix> windows,
                  std::span<const int> labels, std::span<const std::vector<double>> masks = {});

/// Scales grad so its L2 norm is at most max_norm; returns the norm after scaling.
double clip_global_norm(std::span<double> grad, double max_norm);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate, const AdamConfig& cfg = {});

/// Inverted-dropout multipliers: 0 with probability rate, else 1/(1-rate).
std::vector<double> dropout_mask(Rng& rng, double rate, std::size_t n);
std::vector<double> apply_dropout(Rng& rng, double rate, std::span<const double> v);

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double dropout_rate = 0.5;
  std::uint64_t seed = 1;
  AdamConfig adam{};
  double gradient_clip_norm = 5.0;
  std::size_t hidden = 32;
  bool standardize_inputs = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double eval_accuracy = 0.0;  // NaN when no evaluation split was supplied
};

struct TrainResult {
  RecurrentModel model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Seeded mini-batch Adam training. With an evaluation split, the returned
/// model is the snapshot with the best evaluation accuracy; otherwise the
/// final one. Throws NonFiniteGradient, DivergenceDetected.
TrainResult train_recurrent(const HarSplit& train, const HarSplit* eval, CellKind kind,
                            const TrainConfig& cfg);

int predict(const RecurrentModel& model, const Matrix& window);
std::vector<int> predict(const RecurrentModel& model, std::span<const Matrix> windows);

}  // namespace har
