#include <doctest.h>

#include "mimn/model.hpp"
#include "test_helpers.hpp"

using namespace mimn;
using test::random_tensor;

namespace {

HyperParams small_hyper() {
  HyperParams h;
  h.slots = 4;
  h.width = 6;
  h.miu_width = 5;
  h.k_top = 2;
  h.mlp_widths = {10, 8, 2};
  return h;
}

ModelParams small_params(std::uint64_t seed = 3) {
  Rng rng(seed);
  return ModelParams::init(small_hyper(), 12, 7, rng);
}

// Independent reference implementations, plain loops over the raw tensors.
namespace oracle {

Tensor read_weights(const Tensor& memory, const Tensor& key) {
  int m = memory.rows(), d = memory.cols();
  std::vector<double> sims(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double dot = 0, nk = 0, nm = 0;
    for (int j = 0; j < d; ++j) {
      dot += key[j] * memory.at(i, j);
      nk += key[j] * key[j];
      nm += memory.at(i, j) * memory.at(i, j);
    }
    sims[static_cast<size_t>(i)] = dot / ((std::sqrt(nk) + 1e-8) * (std::sqrt(nm) + 1e-8));
  }
  double mx = *std::max_element(sims.begin(), sims.end());
  double z = 0;
  Tensor w({m});
  for (int i = 0; i < m; ++i) {
    w[i] = std::exp(sims[static_cast<size_t>(i)] - mx);
    z += w[i];
  }
  for (int i = 0; i < m; ++i) w[i] /= z;
  return w;
}

Tensor write(const Tensor& memory, const Tensor& w, const Tensor& erase, const Tensor& add) {
  Tensor out = memory;
  for (int i = 0; i < memory.rows(); ++i)
    for (int j = 0; j < memory.cols(); ++j)
      out.at(i, j) = (1.0 - w[i] * erase[j]) * memory.at(i, j) + w[i] * add[j];
  return out;
}

Tensor rebalance(const Tensor& w, const Tensor& g, const Tensor& transfer) {
  int m = w.size();
  std::vector<double> p(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    double s = 0;
    for (int j = 0; j < m; ++j) s += transfer.at(i, j) * g[j];
    p[static_cast<size_t>(i)] = s;
  }
  double mx = *std::max_element(p.begin(), p.end());
  double z = 0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  Tensor out({m});
  for (int i = 0; i < m; ++i) out[i] = w[i] * p[static_cast<size_t>(i)] / z;
  return out;
}

double reg_loss(const Tensor& w_sum, double lambda) {
  double mean = 0;
  for (int i = 0; i < w_sum.size(); ++i) mean += w_sum[i];
  mean /= w_sum.size();
  double s = 0;
  for (int i = 0; i < w_sum.size(); ++i) s += (w_sum[i] - mean) * (w_sum[i] - mean);
  return lambda * s;
}

// Textbook GRU cell written directly against the parameter tensors.
Tensor gru(const ModelParams& p, const Tensor& state, const Tensor& x) {
  int h = p.hyper.miu_width;
  auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b, const Tensor& hs) {
    Tensor out({h});
    for (int i = 0; i < h; ++i) {
      double s = b[i];
      for (int j = 0; j < x.size(); ++j) s += w.at(i, j) * x[j];
      for (int j = 0; j < h; ++j) s += u.at(i, j) * hs[j];
      out[i] = s;
    }
    return out;
  };
  Tensor zu = gate(p.gru_wu, p.gru_uu, p.gru_bu, state);
  Tensor zr = gate(p.gru_wr, p.gru_ur, p.gru_br, state);
  for (int i = 0; i < h; ++i) {
    zu[i] = 1.0 / (1.0 + std::exp(-zu[i]));
    zr[i] = 1.0 / (1.0 + std::exp(-zr[i]));
  }
  Tensor rs({h});
  for (int i = 0; i < h; ++i) rs[i] = zr[i] * state[i];
  Tensor c = gate(p.gru_wc, p.gru_uc, p.gru_bc, rs);
  Tensor out({h});
  for (int i = 0; i < h; ++i) {
    double cand = std::tanh(c[i]);
    out[i] = (1.0 - zu[i]) * state[i] + zu[i] * cand;
  }
  return out;
}

}  // namespace oracle

}  // namespace

TEST_CASE("controller at zero embedding gives activation fixpoints") {
  ModelParams p = small_params();
  ControllerOutput out = controller_step(p, Tensor({p.hyper.width}));
  for (int j = 0; j < p.hyper.width; ++j) {
    CHECK(out.add[j] == 0.0);               // tanh(0)
    CHECK(out.erase[j] == 0.5);             // sigmoid(0)
    CHECK(out.read_key[j] == 0.0);          // zero bias
    CHECK(out.write_key[j] == 0.0);
  }
}

TEST_CASE("controller outputs stay in activation ranges") {
  ModelParams p = small_params();
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    ControllerOutput out = controller_step(p, random_tensor({p.hyper.width}, rng, 5.0));
    for (int j = 0; j < p.hyper.width; ++j) {
      CHECK(std::fabs(out.add[j]) <= 1.0);
      CHECK(out.erase[j] > 0.0);
      CHECK(out.erase[j] < 1.0);
    }
  }
}

TEST_CASE("controller matches a direct matrix arithmetic oracle") {
  ModelParams p = small_params();
  Rng rng(22);
  Tensor emb = random_tensor({p.hyper.width}, rng);
  ControllerOutput out = controller_step(p, emb);
  for (int i = 0; i < p.hyper.width; ++i) {
    double kr = p.b_read_key[i], a = p.b_add[i];
    for (int j = 0; j < p.hyper.width; ++j) {
      kr += p.w_read_key.at(i, j) * emb[j];
      a += p.w_add.at(i, j) * emb[j];
    }
    CHECK(out.read_key[i] == doctest::Approx(kr).epsilon(1e-14));
    CHECK(out.add[i] == doctest::Approx(std::tanh(a)).epsilon(1e-14));
  }
}

TEST_CASE("read weights over identical slots are uniform and readout is the slot") {
  int m = 5, d = 4;
  Tensor memory({m, d});
  Rng rng(8);
  Tensor v = random_tensor({d}, rng);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) memory.at(i, j) = v[j];
  ReadResult r = memory_read(memory, random_tensor({d}, rng));
  for (int i = 0; i < m; ++i) CHECK(r.weights[i] == doctest::Approx(1.0 / m).epsilon(1e-12));
  for (int j = 0; j < d; ++j) CHECK(r.readout[j] == doctest::Approx(v[j]).epsilon(1e-12));
}

TEST_CASE("read weights for an aligned key against orthogonal slots") {
  // Key equals slot 0; remaining slots are orthogonal to it.
  Tensor memory({4, 4});
  memory.at(0, 0) = 2.0;
  memory.at(1, 1) = 1.0;
  memory.at(2, 2) = 3.0;
  memory.at(3, 3) = 0.5;
  Tensor key = Tensor::vec({2.0, 0.0, 0.0, 0.0});
  ReadResult r = memory_read(memory, key);
  double e = std::exp(1.0);
  CHECK(r.weights[0] == doctest::Approx(e / (e + 3.0)).epsilon(1e-6));
  for (int i = 1; i < 4; ++i)
    CHECK(r.weights[i] == doctest::Approx(1.0 / (e + 3.0)).epsilon(1e-6));
  CHECK(r.weights[0] == doctest::Approx(0.4754).epsilon(1e-3));
  CHECK(r.weights[1] == doctest::Approx(0.1749).epsilon(1e-3));
}

TEST_CASE("memory_read matches a per-slot loop oracle on random inputs") {
  Rng rng(14);
  for (int rep = 0; rep < 200; ++rep) {
    Tensor memory = random_tensor({4, 6}, rng, 2.0);
    Tensor key = random_tensor({6}, rng, 2.0);
    ReadResult r = memory_read(memory, key);
    Tensor expect = oracle::read_weights(memory, key);
    double sum = 0;
    for (int i = 0; i < 4; ++i) {
      CHECK(std::fabs(r.weights[i] - expect[i]) < 1e-12);
      CHECK(r.weights[i] >= 0.0);
      sum += r.weights[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("memory_write full-erase empties one slot and spares the rest") {
  Rng rng(15);
  Tensor memory = random_tensor({4, 6}, rng);
  Tensor w({4});
  w[2] = 1.0;
  Tensor erase({6});
  for (int j = 0; j < 6; ++j) erase[j] = 1.0 - 1e-12;
  Tensor add({6});
  Tensor out = memory_write(memory, w, erase, add);
  for (int j = 0; j < 6; ++j) CHECK(std::fabs(out.at(2, j)) < 1e-10);
  for (int i : {0, 1, 3})
    for (int j = 0; j < 6; ++j) CHECK(out.at(i, j) == memory.at(i, j));  // bit-identical
}

TEST_CASE("memory_write with zero erase adds the outer product") {
  Rng rng(16);
  Tensor memory = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({3}, rng, 0.5);
  Tensor add = random_tensor({4}, rng, 0.5);
  Tensor out = memory_write(memory, w, Tensor({4}), add);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(out.at(i, j) == doctest::Approx(memory.at(i, j) + w[i] * add[j]).epsilon(1e-15));
}

TEST_CASE("memory_write matches the elementwise loop oracle exactly") {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    Tensor memory = random_tensor({4, 6}, rng);
    Tensor w = random_tensor({4}, rng, 0.5);
    for (int i = 0; i < 4; ++i) w[i] = std::fabs(w[i]);
    Tensor erase = random_tensor({6}, rng, 0.49);
    for (int j = 0; j < 6; ++j) erase[j] += 0.5;  // (0,1)
    Tensor add = random_tensor({6}, rng);
    Tensor out = memory_write(memory, w, erase, add);
    Tensor expect = oracle::write(memory, w, erase, add);
    for (int i = 0; i < out.size(); ++i) CHECK(out[i] == expect[i]);
  }
}

TEST_CASE("rebalance with zero transfer parameters divides by slot count") {
  Rng rng(18);
  Tensor w = random_tensor({4}, rng, 0.5);
  Tensor g = random_tensor({4}, rng, 0.5);
  Tensor out = rebalance_write_weight(w, g, Tensor({4, 4}));
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(w[i] / 4.0).epsilon(1e-14));
}

TEST_CASE("rebalance degenerates to identity for a single slot") {
  Tensor w = Tensor::vec({0.7});
  Tensor g = Tensor::vec({3.0});
  Tensor transfer({1, 1});
  transfer.at(0, 0) = -2.5;
  Tensor out = rebalance_write_weight(w, g, transfer);
  CHECK(out[0] == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("rebalance matches the direct evaluation oracle") {
  Rng rng(19);
  for (int rep = 0; rep < 200; ++rep) {
    Tensor w = random_tensor({5}, rng, 0.5);
    Tensor g = random_tensor({5}, rng, 2.0);
    for (int i = 0; i < 5; ++i) g[i] = std::fabs(g[i]);
    Tensor transfer = random_tensor({5, 5}, rng);
    Tensor out = rebalance_write_weight(w, g, transfer);
    Tensor expect = oracle::rebalance(w, g, transfer);
    for (int i = 0; i < 5; ++i) CHECK(std::fabs(out[i] - expect[i]) < 1e-12);
  }
}

TEST_CASE("utilization penalty examples") {
  CHECK(utilization_reg_loss(Tensor::vec({0.3, 0.3, 0.3}), 2.0) == 0.0);
  CHECK(utilization_reg_loss(Tensor::vec({0.6, 0.4}), 1.0) == doctest::Approx(0.02).epsilon(1e-12));
  Tensor w = Tensor::vec({0.1, 0.5, 0.9});
  double base = utilization_reg_loss(w, 1.0);
  CHECK(utilization_reg_loss(w, 3.5) == doctest::Approx(3.5 * base).epsilon(1e-14));
}

TEST_CASE("miu_update with k_top = m updates every channel") {
  ModelParams p = small_params();
  Rng rng(23);
  Tensor channels = random_tensor({4, 5}, rng);
  Tensor memory = random_tensor({4, 6}, rng);
  Tensor wr = Tensor::vec({0.1, 0.2, 0.3, 0.4});
  Tensor emb = random_tensor({6}, rng);
  Tensor out = miu_update(p, channels, memory, wr, emb, 4);
  for (int i = 0; i < 4; ++i) {
    bool changed = false;
    for (int j = 0; j < 5; ++j)
      if (out.at(i, j) != channels.at(i, j)) changed = true;
    CHECK(changed);
  }
}

TEST_CASE("miu_update with k_top = 1 touches only the argmax channel") {
  ModelParams p = small_params();
  Rng rng(24);
  Tensor channels = random_tensor({4, 5}, rng);
  Tensor memory = random_tensor({4, 6}, rng);
  Tensor wr = Tensor::vec({0.1, 0.5, 0.3, 0.1});
  Tensor emb = random_tensor({6}, rng);
  Tensor out = miu_update(p, channels, memory, wr, emb, 1);
  for (int i : {0, 2, 3})
    for (int j = 0; j < 5; ++j) CHECK(out.at(i, j) == channels.at(i, j));  // bit-identical
  bool changed = false;
  for (int j = 0; j < 5; ++j)
    if (out.at(1, j) != channels.at(1, j)) changed = true;
  CHECK(changed);
}

TEST_CASE("miu boundary ties pick the lowest slot index") {
  ModelParams p = small_params();
  Rng rng(25);
  Tensor channels = random_tensor({4, 5}, rng);
  Tensor memory = random_tensor({4, 6}, rng);
  Tensor wr = Tensor::vec({0.25, 0.25, 0.25, 0.25});
  Tensor emb = random_tensor({6}, rng);
  Tensor out = miu_update(p, channels, memory, wr, emb, 2);
  for (int j = 0; j < 5; ++j) {
    CHECK(out.at(2, j) == channels.at(2, j));
    CHECK(out.at(3, j) == channels.at(3, j));
    CHECK(out.at(0, j) != channels.at(0, j));
    CHECK(out.at(1, j) != channels.at(1, j));
  }
}

TEST_CASE("one selected channel equals the standalone GRU oracle") {
  ModelParams p = small_params();
  Rng rng(26);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor channels = random_tensor({4, 5}, rng);
    Tensor memory = random_tensor({4, 6}, rng);
    Tensor wr = Tensor::vec({0.05, 0.8, 0.1, 0.05});
    Tensor emb = random_tensor({6}, rng);
    Tensor out = miu_update(p, channels, memory, wr, emb, 1);

    Tensor x({12});
    for (int j = 0; j < 6; ++j) x[j] = memory.at(1, j);
    for (int j = 0; j < 6; ++j) x[6 + j] = emb[j];
    Tensor s({5});
    for (int j = 0; j < 5; ++j) s[j] = channels.at(1, j);
    Tensor expect = oracle::gru(p, s, x);
    for (int j = 0; j < 5; ++j) CHECK(std::fabs(out.at(1, j) - expect[j]) < 1e-12);
  }
}

TEST_CASE("gru_cell agrees with the reference gru") {
  ModelParams p = small_params();
  Rng rng(27);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor s = random_tensor({5}, rng);
    Tensor x = random_tensor({12}, rng);
    Tensor got = gru_cell(p, s, x);
    Tensor expect = oracle::gru(p, s, x);
    for (int j = 0; j < 5; ++j) CHECK(std::fabs(got[j] - expect[j]) < 1e-12);
  }
}

TEST_CASE("predict is symmetric at an all-zero model") {
  HyperParams h = small_hyper();
  Rng rng(0);
  ModelParams p = ModelParams::init(h, 5, 4, rng);
  // Zero every tensor: embeddings, controller, head.
  for (const ParamRef& ref : p.param_list())
    for (int i = 0; i < ref.tensor->size(); ++i) (*ref.tensor)[i] = 0.0;
  UserInterestState st = cold_start_state(p);
  double prob = predict(p, st, 1, 1);
  CHECK(prob == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("predict stays in (0,1) and the head normalizes") {
  ModelParams p = small_params(9);
  Rng rng(29);
  for (int rep = 0; rep < 100; ++rep) {
    UserInterestState st = cold_start_state(p);
    st.memory = random_tensor({4, 6}, rng);
    st.channels = random_tensor({4, 5}, rng);
    double prob = predict(p, st, 1 + static_cast<int>(rng() % 11),
                          1 + static_cast<int>(rng() % 6));
    CHECK(prob > 0.0);
    CHECK(prob < 1.0);
  }
}
