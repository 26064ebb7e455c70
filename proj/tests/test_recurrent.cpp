#include <doctest.h>

#include <cmath>

#include "har/error.hpp"
#include "har/recurrent.hpp"

using namespace har;

namespace {

const CellKind kRnn{CellType::Rnn, false};
const CellKind kGru{CellType::Gru, false};
const CellKind kLstm{CellType::Lstm, false};
const CellKind kBiLstm{CellType::Lstm, true};

Matrix random_window(Rng& rng, std::size_t input, std::size_t steps) {
  Matrix w(input, steps);
  for (double& v : w.data()) v = rng.gaussian();
  return w;
}

// Owns the storage behind a hand-built CellWeights view.
struct ManualCell {
  std::vector<std::vector<double>> storage;
  CellWeights weights;

  ManualCell(CellType type, std::size_t gates, std::size_t input, std::size_t hidden,
             const std::vector<double>& biases) {
    weights.type = type;
    weights.input = input;
    weights.hidden = hidden;
    storage.reserve(gates * 3);
    for (std::size_t g = 0; g < gates; ++g) {
      storage.emplace_back(hidden * input, 0.0);
      storage.emplace_back(hidden * hidden, 0.0);
      storage.emplace_back(hidden, biases[g]);
    }
    for (std::size_t g = 0; g < gates; ++g) {
      weights.gates.push_back({storage[3 * g], storage[3 * g + 1], storage[3 * g + 2]});
    }
  }
};

}  // namespace

TEST_CASE("parameter counts at the default shape") {
  CHECK(count_params(kRnn) == 1542);
  CHECK(count_params(kGru) == 4230);
  CHECK(count_params(kLstm) == 5574);
  CHECK(count_params(kBiLstm) == 11142);
  Rng rng(1);
  for (CellKind k : {kRnn, kGru, kLstm, kBiLstm}) {
    CHECK(init_model(k, RecurrentShape{}, rng).params().size() == count_params(k));
    CHECK(parse_cell_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_cell_kind("transformer"), Error);
}

TEST_CASE("initialisation sets the LSTM forget bias to one and other biases to zero") {
  Rng rng(3);
  const RecurrentModel m = init_model(kBiLstm, RecurrentShape{4, 5, 6}, rng);
  for (std::size_t d = 0; d < 2; ++d) {
    const CellWeights w = m.cell(d);
    for (std::size_t g = 0; g < 4; ++g) {
      for (double b : w.gates[g].bias) CHECK(b == (g == 1 ? 1.0 : 0.0));
    }
  }
  for (std::size_t i = m.dense_bias_offset(); i < m.params().size(); ++i) CHECK(m.params()[i] == 0.0);
}

TEST_CASE("BPTT gradients match central differences") {
  Rng rng(77);
  for (CellKind kind : {kRnn, kGru, kLstm, kBiLstm}) {
    CAPTURE(to_string(kind));
    for (int restart = 0; restart < 20; ++restart) {
      const RecurrentShape shape{3, 4, 6};
      RecurrentModel model = init_model(kind, shape, rng);
      for (double& p : model.params()) p += 0.3 * rng.gaussian();
      std::vector<Matrix> windows;
      std::vector<int> labels;
      std::vector<std::vector<double>> masks;
      for (int i = 0; i < 3; ++i) {
        windows.push_back(random_window(rng, 3, 5));
        labels.push_back(1 + static_cast<int>(rng.below(6)));
        masks.push_back(dropout_mask(rng, restart % 2 ? 0.5 : 0.0, model.feature_width()));
      }
      const std::vector<double> point(model.params().begin(), model.params().end());
      const ScalarFn f = [&](std::span<const double> p) {
        RecurrentModel probe = model;
        std::copy(p.begin(), p.end(), probe.params().begin());
        return batch_loss(probe, windows, labels, masks);
      };
      const GradientFn g = [&](std::span<const double> p) {
        RecurrentModel probe = model;
        std::copy(p.begin(), p.end(), probe.params().begin());
        return loss_and_gradient(probe, windows, labels, masks).grad;
      };
      CHECK(check_gradient(f, g, point) < 1e-6);
    }
  }
}

TEST_CASE("loss_and_gradient reports the mean loss and matches batch_loss") {
  Rng rng(4);
  const RecurrentModel m = init_model(kGru, RecurrentShape{2, 3, 6}, rng);
  std::vector<Matrix> w{random_window(rng, 2, 4), random_window(rng, 2, 4)};
  const std::vector<int> labels{1, 6};
  CHECK(loss_and_gradient(m, w, labels).loss == doctest::Approx(batch_loss(m, w, labels)));
  const std::vector<int> bad{1, 7};
  CHECK_THROWS_AS(batch_loss(m, w, bad), Error);
  std::vector<Matrix> wrong{random_window(rng, 3, 4), random_window(rng, 3, 4)};
  CHECK_THROWS_AS(batch_loss(m, wrong, labels), Error);
}

TEST_CASE("saturated gates pass state through unchanged") {
  Rng rng(9);
  const std::vector<double> x{0.5, -1.0};
  const std::vector<double> h_prev{0.3, -0.7, 0.1};
  const std::vector<double> c_prev{2.0, -1.5, 0.25};
  SUBCASE("GRU update gate closed keeps h") {
    ManualCell cell(CellType::Gru, 3, 2, 3, {-1e3, 0.0, 0.0});
    const CellState s = cell_forward(cell.weights, x, h_prev);
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.h[j] == doctest::Approx(h_prev[j]));
  }
  SUBCASE("LSTM forget open, input closed keeps c") {
    ManualCell cell(CellType::Lstm, 4, 2, 3, {-1e3, 1e3, 0.0, 1e3});
    const CellState s = cell_forward(cell.weights, x, h_prev, c_prev);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(s.c[j] == doctest::Approx(c_prev[j]));
      CHECK(s.h[j] == doctest::Approx(std::tanh(c_prev[j])));
    }
  }
  SUBCASE("LSTM needs a cell state") {
    ManualCell cell(CellType::Lstm, 4, 2, 3, {0, 0, 0, 0});
    CHECK_THROWS_AS(cell_forward(cell.weights, x, h_prev), Error);
  }
}

TEST_CASE("bidirectional final states read the sequence both ways") {
  Rng rng(12);
  const RecurrentModel bi = init_model(kBiLstm, RecurrentShape{2, 3, 6}, rng);
  const Matrix w = random_window(rng, 2, 6);
  Matrix reversed(2, 6);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t t = 0; t < 6; ++t) reversed(c, t) = w(c, 5 - t);
  }
  const auto a = final_states(bi, w);
  REQUIRE(a.size() == 2);
  // Backward direction on w equals a forward unroll of reversed w through the same cell.
  const CellWeights back = bi.cell(1);
  std::vector<double> h(3, 0.0), c(3, 0.0);
  for (std::size_t t = 0; t < 6; ++t) {
    const std::vector<double> x{reversed(0, t), reversed(1, t)};
    CellState s = cell_forward(back, x, h, c);
    h = s.h;
    c = s.c;
  }
  for (std::size_t j = 0; j < 3; ++j) CHECK(a[1][j] == doctest::Approx(h[j]).epsilon(1e-12));
}

TEST_CASE("global norm clipping") {
  std::vector<double> g{3, 4};
  CHECK(clip_global_norm(g, 10.0) == doctest::Approx(5.0));
  CHECK(g == std::vector<double>{3, 4});
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(1.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
}

TEST_CASE("first Adam step moves each parameter by the learning rate") {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 1e-3};
  AdamState state;
  adam_step(p, g, state, 0.01);
  CHECK(state.step == 1);
  CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.99).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(0.49).epsilon(1e-4));
}

TEST_CASE("dropout masks are inverted and seeded") {
  Rng a(5), b(5);
  const auto m = dropout_mask(a, 0.5, 10000);
  CHECK(m == dropout_mask(b, 0.5, 10000));
  double sum = 0.0;
  for (double v : m) {
    CHECK((v == 0.0 || v == 2.0));
    sum += v;
  }
  CHECK(sum / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
  Rng c(1);
  for (double v : dropout_mask(c, 0.0, 50)) CHECK(v == 1.0);
  CHECK_THROWS_AS(dropout_mask(c, 1.0, 3), Error);
}

TEST_CASE("training learns the synthetic windows and is reproducible") {
  const HarDataset d = make_synthetic(21, 12);
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.hidden = 8;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.dropout_rate = 0.1;
  cfg.seed = 4;
  cfg.standardize_inputs = true;
  const TrainResult a = train_recurrent(d.train, &d.test, kGru, cfg);
  const TrainResult b = train_recurrent(d.train, &d.test, kGru, cfg);
  CHECK(a.model == b.model);
  REQUIRE(a.history.size() == 25);
  CHECK(a.history.back().train_loss < a.history.front().train_loss);
  std::size_t right = 0;
  const auto pred = predict(a.model, d.test.windows);
  for (std::size_t i = 0; i < pred.size(); ++i) right += pred[i] == d.test.labels[i];
  const double acc = static_cast<double>(right) / static_cast<double>(pred.size());
  CHECK(acc >= 0.8);
  CHECK(acc == doctest::Approx(a.history[static_cast<std::size_t>(a.best_epoch - 1)].eval_accuracy));

  cfg.seed = 5;
  const TrainResult other = train_recurrent(d.train, &d.test, kGru, cfg);
  CHECK_FALSE(other.model == a.model);

  const TrainResult no_eval = train_recurrent(d.train, nullptr, kRnn, cfg);
  CHECK(std::isnan(no_eval.history.front().eval_accuracy));
}

TEST_CASE("zero weights give a zero state and uniform logits") {
  for (CellKind kind : {kRnn, kGru, kLstm, kBiLstm}) {
    const RecurrentModel m(kind, RecurrentShape{3, 5, 6});
    Rng rng(1);
    const Matrix w = random_window(rng, 3, 7);
    for (const auto& h : final_states(m, w)) {
      for (double v : h) CHECK(v == 0.0);
    }
    const auto logits = sequence_forward(m, Matrix(3, 7));
    for (double v : logits) CHECK(v == 0.0);
    const std::vector<Matrix> batch{w, w};
    const std::vector<int> labels{2, 5};
    CHECK(batch_loss(m, batch, labels) == doctest::Approx(std::log(6.0)));
  }
}

TEST_CASE("tied directions agree on a palindromic window") {
  Rng rng(13);
  RecurrentModel m = init_model(kBiLstm, RecurrentShape{2, 3, 6}, rng);
  const std::size_t per_direction = m.gate_offset(1, 0) - m.gate_offset(0, 0);
  auto p = m.params();
  std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(m.gate_offset(0, 0)), per_direction,
              p.begin() + static_cast<std::ptrdiff_t>(m.gate_offset(1, 0)));
  Matrix w(2, 7);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t t = 0; t < 4; ++t) w(c, t) = w(c, 6 - t) = rng.gaussian();
  }
  const auto states = final_states(m, w);
  for (std::size_t j = 0; j < 3; ++j) CHECK(states[0][j] == doctest::Approx(states[1][j]).epsilon(1e-14));
  CHECK(sequence_forward(m, w) == sequence_forward(m, w));
}

TEST_CASE("clipping and Adam edge cases") {
  Rng rng(2);
  std::vector<double> g(50);
  for (double& v : g) v = rng.gaussian(0.0, 10.0);
  CHECK(std::abs(clip_global_norm(g, 0.25) - 0.25) < 1e-10);
  CHECK(std::abs(norm2(g) - 0.25) < 1e-10);

  std::vector<double> p{0.5, -1.5};
  const std::vector<double> before = p;
  AdamState state;
  for (int i = 0; i < 10; ++i) adam_step(p, std::vector<double>{0.0, 0.0}, state, 0.1);
  CHECK(p == before);
}

TEST_CASE("dropout keeps half the units at rate one half") {
  Rng rng(55);
  const auto m = dropout_mask(rng, 0.5, 100000);
  const auto survivors = std::count_if(m.begin(), m.end(), [](double v) { return v > 0.0; });
  CHECK(std::abs(static_cast<double>(survivors) / 1e5 - 0.5) < 0.01);
  const std::vector<double> v{1.0, -2.0, 3.0};
  Rng other(1);
  CHECK(apply_dropout(other, 0.0, v) == v);
}

TEST_CASE("every cell kind fits the synthetic windows within 20 epochs") {
  const HarDataset d = make_synthetic(23, 10);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.hidden = 16;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.dropout_rate = 0.0;
  cfg.seed = 1;
  cfg.standardize_inputs = true;
  for (CellKind kind : {kRnn, kGru, kLstm, kBiLstm}) {
    CAPTURE(to_string(kind));
    const TrainResult r = train_recurrent(d.train, nullptr, kind, cfg);
    const auto pred = predict(r.model, d.train.windows);
    std::size_t right = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) right += pred[i] == d.train.labels[i];
    CHECK(static_cast<double>(right) / static_cast<double>(pred.size()) >= 0.95);
  }
}
