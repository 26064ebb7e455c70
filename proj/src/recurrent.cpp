#include "har/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "har/error.hpp"

namespace har {

namespace {

struct MutableGate {
  double* wx;
  double* wh;
  double* bias;
};

void matvec_add(double* out, const double* w, const double* v, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * v[c];
    out[r] += s;
  }
}

void matvec_transposed_add(double* out, const double* w, const double* v, std::size_t rows,
                           std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    const double a = v[r];
    if (a == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * a;
  }
}

void outer_add(double* g, const double* a, const double* v, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* gr = g + r * cols;
    const double ar = a[r];
    if (ar == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += ar * v[c];
  }
}

// Pre-activation of one gate: W_x x + W_h h + b.
void preactivation(const GateWeights& g, const double* x, const double* h, std::size_t input,
                   std::size_t hidden, double* out) {
  std::copy(g.bias.begin(), g.bias.end(), out);
  matvec_add(out, g.wx.data(), x, hidden, input);
  matvec_add(out, g.wh.data(), h, hidden, hidden);
}

// One forward step. gates receives G*hidden post-activation values.
void step_forward(const CellWeights& w, const double* x, const double* hp, const double* cp,
                  double* h, double* c, double* gates) {
  const std::size_t H = w.hidden;
  const std::size_t I = w.input;
  switch (w.type) {
    case CellType::Rnn: {
      preactivation(w.gates[0], x, hp, I, H, gates);
      for (std::size_t j = 0; j < H; ++j) {
        gates[j] = std::tanh(gates[j]);
        h[j] = gates[j];
      }
      break;
    }
    case CellType::Gru: {
      double* z = gates;
      double* r = gates + H;
      double* n = gates + 2 * H;
      preactivation(w.gates[0], x, hp, I, H, z);
      preactivation(w.gates[1], x, hp, I, H, r);
      for (std::size_t j = 0; j < H; ++j) {
        z[j] = sigmoid(z[j]);
        r[j] = sigmoid(r[j]);
      }
      std::vector<double> rh(H);
      for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * hp[j];
      preactivation(w.gates[2], x, rh.data(), I, H, n);
      for (std::size_t j = 0; j < H; ++j) {
        n[j] = std::tanh(n[j]);
        h[j] = (1.0 - z[j]) * hp[j] + z[j] * n[j];
      }
      break;
    }
    case CellType::Lstm: {
      double* ig = gates;
      double* fg = gates + H;
      double* gg = gates + 2 * H;
      double* og = gates + 3 * H;
      for (std::size_t g = 0; g < 4; ++g) preactivation(w.gates[g], x, hp, I, H, gates + g * H);
      for (std::size_t j = 0; j < H; ++j) {
        ig[j] = sigmoid(ig[j]);
        fg[j] = sigmoid(fg[j]);
        gg[j] = std::tanh(gg[j]);
        og[j] = sigmoid(og[j]);
        c[j] = fg[j] * cp[j] + ig[j] * gg[j];
        h[j] = og[j] * std::tanh(c[j]);
      }
      break;
    }
  }
}

struct DirectionCache {
  std::size_t steps = 0;
  std::vector<double> h;      // (T+1) x H, row 0 is the initial zero state
  std::vector<double> c;      // (T+1) x H, LSTM only
  std::vector<double> gates;  // T x G x H
};

// Time-major copy of the (optionally normalized) input: T x I.
std::vector<double> time_major(const RecurrentModel& model, const Matrix& window) {
  const std::size_t I = model.shape().input;
  if (window.rows() != I) {
    throw Error(ErrorKind::ShapeMismatch, "window has " + std::to_string(window.rows()) +
                                              " channels, model expects " + std::to_string(I));
  }
  if (window.cols() == 0) throw Error(ErrorKind::ShapeMismatch, "window has no time steps");
  const std::size_t T = window.cols();
  std::vector<double> xs(T * I);
  const bool normalize = !model.input_mean.empty();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < I; ++c) {
      double v = window(c, t);
      if (normalize) v = (v - model.input_mean[c]) / model.input_std[c];
      xs[t * I + c] = v;
    }
  }
  return xs;
}

void run_direction(const CellWeights& w, const std::vector<double>& xs, std::size_t steps,
                   bool reverse, DirectionCache& cache) {
  const std::size_t H = w.hidden;
  const std::size_t I = w.input;
  const std::size_t G = w.gates.size();
  cache.steps = steps;
  cache.h.assign((steps + 1) * H, 0.0);
  cache.c.assign(w.type == CellType::Lstm ? (steps + 1) * H : 0, 0.0);
  cache.gates.assign(steps * G * H, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const double* cp = w.type == CellType::Lstm ? cache.c.data() + s * H : nullptr;
    double* c = w.type == CellType::Lstm ? cache.c.data() + (s + 1) * H : nullptr;
    step_forward(w, xs.data() + t * I, cache.h.data() + s * H, cp, cache.h.data() + (s + 1) * H, c,
                 cache.gates.data() + s * G * H);
  }
}

// Backpropagates dh_final through one direction, accumulating into grads.
void backprop_direction(const CellWeights& w, const std::vector<double>& xs, bool reverse,
                        const DirectionCache& cache, const double* dh_final,
                        std::vector<MutableGate>& grads) {
  const std::size_t H = w.hidden;
  const std::size_t I = w.input;
  const std::size_t G = w.gates.size();
  const std::size_t T = cache.steps;
  std::vector<double> dh(dh_final, dh_final + H);
  std::vector<double> dc(w.type == CellType::Lstm ? H : 0, 0.0);
  std::vector<double> dh_prev(H);
  std::vector<double> da(G * H);
  std::vector<double> scratch(H);

  for (std::size_t s = T; s-- > 0;) {
    const std::size_t t = reverse ? T - 1 - s : s;
    const double* x = xs.data() + t * I;
    const double* hp = cache.h.data() + s * H;
    const double* gates = cache.gates.data() + s * G * H;
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);

    switch (w.type) {
      case CellType::Rnn: {
        for (std::size_t j = 0; j < H; ++j) da[j] = dh[j] * (1.0 - gates[j] * gates[j]);
        break;
      }
      case CellType::Gru: {
        const double* z = gates;
        const double* r = gates + H;
        const double* n = gates + 2 * H;
        double* daz = da.data();
        double* dar = da.data() + H;
        double* dan = da.data() + 2 * H;
        for (std::size_t j = 0; j < H; ++j) {
          daz[j] = dh[j] * (n[j] - hp[j]) * z[j] * (1.0 - z[j]);
          dan[j] = dh[j] * z[j] * (1.0 - n[j] * n[j]);
          dh_prev[j] += dh[j] * (1.0 - z[j]);
        }
        // d(r * h_prev) = U_n^T dan
        std::fill(scratch.begin(), scratch.end(), 0.0);
        matvec_transposed_add(scratch.data(), w.gates[2].wh.data(), dan, H, H);
        for (std::size_t j = 0; j < H; ++j) {
          dar[j] = scratch[j] * hp[j] * r[j] * (1.0 - r[j]);
          dh_prev[j] += scratch[j] * r[j];
        }
        break;
      }
      case CellType::Lstm: {
        const double* ig = gates;
        const double* fg = gates + H;
        const double* gg = gates + 2 * H;
        const double* og = gates + 3 * H;
        const double* c = cache.c.data() + (s + 1) * H;
        const double* cp = cache.c.data() + s * H;
        for (std::size_t j = 0; j < H; ++j) {
          const double tc = std::tanh(c[j]);
          const double dct = dc[j] + dh[j] * og[j] * (1.0 - tc * tc);
          da[j] = dct * gg[j] * ig[j] * (1.0 - ig[j]);
          da[H + j] = dct * cp[j] * fg[j] * (1.0 - fg[j]);
          da[2 * H + j] = dct * ig[j] * (1.0 - gg[j] * gg[j]);
          da[3 * H + j] = dh[j] * tc * og[j] * (1.0 - og[j]);
          dc[j] = dct * fg[j];
        }
        break;
      }
    }

    for (std::size_t g = 0; g < G; ++g) {
      const double* dag = da.data() + g * H;
      outer_add(grads[g].wx, dag, x, H, I);
      for (std::size_t j = 0; j < H; ++j) grads[g].bias[j] += dag[j];
      if (w.type == CellType::Gru && g == 2) {
        for (std::size_t j = 0; j < H; ++j) scratch[j] = gates[H + j] * hp[j];
        outer_add(grads[g].wh, dag, scratch.data(), H, H);
      } else {
        outer_add(grads[g].wh, dag, hp, H, H);
        matvec_transposed_add(dh_prev.data(), w.gates[g].wh.data(), dag, H, H);
      }
    }
    dh.swap(dh_prev);
  }
}

struct Forward {
  std::vector<double> xs;
  std::vector<DirectionCache> caches;
  std::vector<double> features;  // concatenated final states, after dropout
  std::vector<double> logits;
};

Forward forward_pass(const RecurrentModel& model, const Matrix& window,
                     std::span<const double> mask) {
  Forward fw;
  fw.xs = time_major(model, window);
  const std::size_t T = window.cols();
  const std::size_t H = model.shape().hidden;
  const std::size_t dirs = model.kind().directions();
  fw.caches.resize(dirs);
  fw.features.resize(dirs * H);
  for (std::size_t d = 0; d < dirs; ++d) {
    run_direction(model.cell(d), fw.xs, T, d == 1, fw.caches[d]);
    std::copy_n(fw.caches[d].h.data() + T * H, H, fw.features.data() + d * H);
  }
  if (!mask.empty()) {
    if (mask.size() != fw.features.size()) {
      throw Error(ErrorKind::ShapeMismatch, "dropout mask length differs from feature width");
    }
    for (std::size_t k = 0; k < mask.size(); ++k) fw.features[k] *= mask[k];
  }
  const std::size_t C = model.shape().classes;
  const auto p = model.params();
  fw.logits.assign(p.begin() + static_cast<long>(model.dense_bias_offset()),
                   p.begin() + static_cast<long>(model.dense_bias_offset() + C));
  matvec_add(fw.logits.data(), p.data() + model.dense_weight_offset(), fw.features.data(), C,
             fw.features.size());
  return fw;
}

double cross_entropy(std::span<const double> logits, int label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - mx);
  return std::log(total) + mx - logits[static_cast<std::size_t>(label - 1)];
}

void check_batch(const RecurrentModel& model, std::span<const Matrix> windows,
                 std::span<const int> labels, std::span<const std::vector<double>> masks) {
  if (windows.empty()) throw Error(ErrorKind::EmptyInput, "empty batch");
  if (windows.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "windows vs labels");
  if (!masks.empty() && masks.size() != windows.size()) {
    throw Error(ErrorKind::LengthMismatch, "masks vs windows");
  }
  for (int code : labels) {
    if (code < 1 || static_cast<std::size_t>(code) > model.shape().classes) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(code));
    }
  }
}

}  // namespace

std::size_t CellKind::gates() const noexcept {
  switch (type) {
    case CellType::Rnn: return 1;
    case CellType::Gru: return 3;
    case CellType::Lstm: return 4;
  }
  return 0;
}

std::string_view to_string(CellKind kind) {
  switch (kind.type) {
    case CellType::Rnn: return kind.bidirectional ? "birnn" : "rnn";
    case CellType::Gru: return kind.bidirectional ? "bigru" : "gru";
    case CellType::Lstm: return kind.bidirectional ? "bilstm" : "lstm";
  }
  return "unknown";
}

CellKind parse_cell_kind(std::string_view name) {
  if (name == "rnn") return {CellType::Rnn, false};
  if (name == "lstm") return {CellType::Lstm, false};
  if (name == "gru") return {CellType::Gru, false};
  if (name == "bilstm") return {CellType::Lstm, true};
  if (name == "birnn") return {CellType::Rnn, true};
  if (name == "bigru") return {CellType::Gru, true};
  throw Error(ErrorKind::InvalidArgument, "unknown recurrent kind " + std::string(name));
}

std::size_t count_params(CellKind kind, std::size_t hidden, std::size_t input, std::size_t classes) {
  const std::size_t per_gate = hidden * (hidden + input) + hidden;
  const std::size_t width = kind.directions() * hidden;
  return kind.directions() * kind.gates() * per_gate + classes * width + classes;
}

RecurrentModel::RecurrentModel(CellKind kind, RecurrentShape shape)
    : kind_(kind), shape_(shape), params_(count_params(kind, shape.hidden, shape.input, shape.classes), 0.0) {
  if (shape.input == 0 || shape.hidden == 0 || shape.classes == 0) {
    throw Error(ErrorKind::InvalidArgument, "recurrent dimensions must be positive");
  }
}

std::size_t RecurrentModel::gate_offset(std::size_t direction, std::size_t gate) const {
  const std::size_t per_gate = shape_.hidden * (shape_.hidden + shape_.input) + shape_.hidden;
  return (direction * kind_.gates() + gate) * per_gate;
}

std::size_t RecurrentModel::dense_weight_offset() const {
  return gate_offset(kind_.directions(), 0);
}

std::size_t RecurrentModel::dense_bias_offset() const {
  return dense_weight_offset() + shape_.classes * feature_width();
}

CellWeights RecurrentModel::cell(std::size_t direction) const {
  CellWeights w;
  w.type = kind_.type;
  w.input = shape_.input;
  w.hidden = shape_.hidden;
  const std::size_t H = shape_.hidden;
  const std::size_t I = shape_.input;
  for (std::size_t g = 0; g < kind_.gates(); ++g) {
    const double* base = params_.data() + gate_offset(direction, g);
    w.gates.push_back(GateWeights{{base, H * I}, {base + H * I, H * H}, {base + H * I + H * H, H}});
  }
  return w;
}

RecurrentModel init_model(CellKind kind, RecurrentShape shape, Rng& rng) {
  RecurrentModel model(kind, shape);
  auto p = model.params();
  const std::size_t H = shape.hidden;
  const std::size_t I = shape.input;
  for (std::size_t d = 0; d < kind.directions(); ++d) {
    for (std::size_t g = 0; g < kind.gates(); ++g) {
      const std::size_t off = model.gate_offset(d, g);
      const Matrix wx = init_weights(rng, I, H, InitScheme::Xavier);
      const Matrix wh = init_weights(rng, H, H, InitScheme::Xavier);
      std::copy(wx.data().begin(), wx.data().end(), p.begin() + static_cast<long>(off));
      std::copy(wh.data().begin(), wh.data().end(), p.begin() + static_cast<long>(off + H * I));
      const double bias = kind.type == CellType::Lstm && g == 1 ? 1.0 : 0.0;
      std::fill_n(p.begin() + static_cast<long>(off + H * I + H * H), H, bias);
    }
  }
  const Matrix dense = init_weights(rng, model.feature_width(), shape.classes, InitScheme::Xavier);
  std::copy(dense.data().begin(), dense.data().end(),
            p.begin() + static_cast<long>(model.dense_weight_offset()));
  return model;
}

CellState cell_forward(const CellWeights& weights, std::span<const double> x,
                       std::span<const double> h_prev, std::span<const double> c_prev) {
  const std::size_t H = weights.hidden;
  if (x.size() != weights.input || h_prev.size() != H) {
    throw Error(ErrorKind::ShapeMismatch, "cell input or state has the wrong length");
  }
  if (weights.type == CellType::Lstm && c_prev.size() != H) {
    throw Error(ErrorKind::ShapeMismatch, "LSTM cell needs a cell state of the hidden width");
  }
  CellState out;
  out.h.resize(H);
  if (weights.type == CellType::Lstm) out.c.resize(H);
  std::vector<double> gates(weights.gates.size() * H);
  step_forward(weights, x.data(), h_prev.data(), c_prev.empty() ? nullptr : c_prev.data(),
               out.h.data(), out.c.empty() ? nullptr : out.c.data(), gates.data());
  return out;
}

std::vector<double> sequence_forward(const RecurrentModel& model, const Matrix& window,
                                     std::span<const double> dropout_mask) {
  return forward_pass(model, window, dropout_mask).logits;
}

std::vector<std::vector<double>> final_states(const RecurrentModel& model, const Matrix& window) {
  const Forward fw = forward_pass(model, window, {});
  const std::size_t H = model.shape().hidden;
  std::vector<std::vector<double>> out;
  for (std::size_t d = 0; d < model.kind().directions(); ++d) {
    out.emplace_back(fw.features.begin() + static_cast<long>(d * H),
                     fw.features.begin() + static_cast<long>((d + 1) * H));
  }
  return out;
}

double batch_loss(const RecurrentModel& model, std::span<const Matrix> windows,
                  std::span<const int> labels, std::span<const std::vector<double>> masks) {
  check_batch(model, windows, labels, masks);
  double total = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto mask = masks.empty() ? std::span<const double>{} : std::span<const double>(masks[i]);
    total += cross_entropy(forward_pass(model, windows[i], mask).logits, labels[i]);
  }
  return total / static_cast<double>(windows.size());
}

BatchGradient loss_and_gradient(const RecurrentModel& model, std::span<const Matrix> windows,
                                std::span<const int> labels,
                                std::span<const std::vector<double>> masks) {
  check_batch(model, windows, labels, masks);
  const std::size_t H = model.shape().hidden;
  const std::size_t I = model.shape().input;
  const std::size_t C = model.shape().classes;
  const std::size_t D = model.feature_width();
  const std::size_t dirs = model.kind().directions();
  const double inv_batch = 1.0 / static_cast<double>(windows.size());

  BatchGradient out;
  out.grad.assign(model.params().size(), 0.0);
  std::vector<std::vector<MutableGate>> gate_grads(dirs);
  for (std::size_t d = 0; d < dirs; ++d) {
    for (std::size_t g = 0; g < model.kind().gates(); ++g) {
      double* base = out.grad.data() + model.gate_offset(d, g);
      gate_grads[d].push_back(MutableGate{base, base + H * I, base + H * I + H * H});
    }
  }
  std::vector<CellWeights> cells;
  for (std::size_t d = 0; d < dirs; ++d) cells.push_back(model.cell(d));
  const double* dense_w = model.params().data() + model.dense_weight_offset();
  double* grad_dense_w = out.grad.data() + model.dense_weight_offset();
  double* grad_dense_b = out.grad.data() + model.dense_bias_offset();

  std::vector<double> dlogits(C);
  std::vector<double> dfeat(D);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto mask = masks.empty() ? std::span<const double>{} : std::span<const double>(masks[i]);
    const Forward fw = forward_pass(model, windows[i], mask);
    out.loss += cross_entropy(fw.logits, labels[i]) * inv_batch;

    const std::vector<double> p = softmax(fw.logits);
    for (std::size_t k = 0; k < C; ++k) {
      dlogits[k] = (p[k] - (static_cast<int>(k) + 1 == labels[i] ? 1.0 : 0.0)) * inv_batch;
      grad_dense_b[k] += dlogits[k];
    }
    outer_add(grad_dense_w, dlogits.data(), fw.features.data(), C, D);
    std::fill(dfeat.begin(), dfeat.end(), 0.0);
    matvec_transposed_add(dfeat.data(), dense_w, dlogits.data(), C, D);
    if (!mask.empty()) {
      for (std::size_t k = 0; k < D; ++k) dfeat[k] *= mask[k];
    }
    for (std::size_t d = 0; d < dirs; ++d) {
      backprop_direction(cells[d], fw.xs, d == 1, fw.caches[d], dfeat.data() + d * H, gate_grads[d]);
    }
  }
  for (double g : out.grad) {
    if (!std::isfinite(g)) throw Error(ErrorKind::NonFiniteGradient, "non-finite BPTT gradient");
  }
  out.unclipped_norm = norm2(out.grad);
  out.global_norm = out.unclipped_norm;
  return out;
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  const double norm = norm2(grad);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
    return norm2(grad);
  }
  return norm;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw Error(ErrorKind::ShapeMismatch, "params vs grads");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

std::vector<double> dropout_mask(Rng& rng, double rate, std::size_t n) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::InvalidArgument, "dropout rate must be in [0,1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  return mask;
}

std::vector<double> apply_dropout(Rng& rng, double rate, std::span<const double> v) {
  const std::vector<double> mask = dropout_mask(rng, rate, v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * mask[i];
  return out;
}

int predict(const RecurrentModel& model, const Matrix& window) {
  return static_cast<int>(argmax_index(sequence_forward(model, window))) + 1;
}

std::vector<int> predict(const RecurrentModel& model, std::span<const Matrix> windows) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (const Matrix& w : windows) out.push_back(predict(model, w));
  return out;
}

TrainResult train_recurrent(const HarSplit& train, const HarSplit* eval, CellKind kind,
                            const TrainConfig& cfg) {
  if (train.windows.empty()) throw Error(ErrorKind::EmptyInput, "training split has no windows");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw Error(ErrorKind::InvalidArgument, "epochs and batch size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be > 0");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "dropout rate must be in [0,1)");
  }
  Rng rng(cfg.seed);
  RecurrentShape shape{train.windows.front().rows(), cfg.hidden, kNumClasses};
  RecurrentModel model = init_model(kind, shape, rng);
  if (cfg.standardize_inputs) {
    // Per-channel population statistics over every sample of every training window.
    const std::size_t I = shape.input;
    std::vector<double> sum(I, 0.0);
    std::vector<double> sq(I, 0.0);
    double count = 0.0;
    for (const Matrix& w : train.windows) {
      for (std::size_t c = 0; c < I; ++c) {
        for (double v : w.row(c)) {
          sum[c] += v;
          sq[c] += v * v;
        }
      }
      count += static_cast<double>(w.cols());
    }
    model.input_mean.resize(I);
    model.input_std.resize(I);
    for (std::size_t c = 0; c < I; ++c) {
      const double mean = sum[c] / count;
      const double var = std::max(0.0, sq[c] / count - mean * mean);
      model.input_mean[c] = mean;
      model.input_std[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  }

  TrainResult result;
  result.model = model;
  double best_accuracy = -1.0;
  AdamState adam;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Matrix> windows;
      std::vector<int> labels;
      std::vector<std::vector<double>> masks;
      for (std::size_t k = start; k < end; ++k) {
        windows.push_back(train.windows[order[k]]);
        labels.push_back(train.labels[order[k]]);
        masks.push_back(dropout_mask(rng, cfg.dropout_rate, model.feature_width()));
      }
      BatchGradient bg = loss_and_gradient(model, windows, labels, masks);
      if (!std::isfinite(bg.loss)) {
        throw Error(ErrorKind::DivergenceDetected, "loss non-finite in epoch " + std::to_string(epoch));
      }
      clip_global_norm(bg.grad, cfg.gradient_clip_norm);
      adam_step(model.params(), bg.grad, adam, cfg.learning_rate, cfg.adam);
      loss_sum += bg.loss * static_cast<double>(end - start);
      seen += end - start;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.eval_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (eval != nullptr && !eval->windows.empty()) {
      const std::vector<int> predicted = predict(model, eval->windows);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == eval->labels[i];
      record.eval_accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
      if (record.eval_accuracy > best_accuracy) {
        best_accuracy = record.eval_accuracy;
        result.model = model;
        result.best_epoch = epoch;
      }
    } else {
      result.model = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(record);
  }
  return result;
}

}  // namespace har
