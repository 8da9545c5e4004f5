#include "mimn/params.hpp"

#include <cmath>

namespace mimn {

namespace {

Tensor glorot(int out, int in, Rng& rng) {
  Tensor t({out, in});
  fill_uniform(t, rng, std::sqrt(6.0 / (in + out)));
  return t;
}

}  // namespace

ModelParams ModelParams::init(const HyperParams& hyper, int n_items, int n_cats, Rng& rng) {
  hyper.validate();
  MIMN_CHECK(n_items >= 2 && n_cats >= 2, "vocabulary must have at least one real id");
  ModelParams p;
  p.hyper = hyper;
  p.n_items = n_items;
  p.n_cats = n_cats;
  int d = hyper.width, m = hyper.slots, h = hyper.miu_width;

  p.item_emb = Tensor({n_items, d});
  p.cat_emb = Tensor({n_cats, d});
  fill_uniform(p.item_emb, rng, 0.05);
  fill_uniform(p.cat_emb, rng, 0.05);

  p.w_read_key = glorot(d, d, rng);
  p.b_read_key = Tensor({d});
  p.w_write_key = glorot(d, d, rng);
  p.b_write_key = Tensor({d});
  p.w_add = glorot(d, d, rng);
  p.b_add = Tensor({d});
  p.w_erase = glorot(d, d, rng);
  p.b_erase = Tensor({d});

  // Zero transfer parameters start rebalancing at the uniform distribution.
  p.w_transfer = Tensor({m, m});

  p.gru_wu = glorot(h, 2 * d, rng);
  p.gru_uu = glorot(h, h, rng);
  p.gru_bu = Tensor({h});
  p.gru_wr = glorot(h, 2 * d, rng);
  p.gru_ur = glorot(h, h, rng);
  p.gru_br = Tensor({h});
  p.gru_wc = glorot(h, 2 * d, rng);
  p.gru_uc = glorot(h, h, rng);
  p.gru_bc = Tensor({h});

  int in = hyper.feature_dim();
  for (int w : hyper.mlp_widths) {
    p.mlp_w.push_back(glorot(w, in, rng));
    p.mlp_b.push_back(Tensor({w}));
    in = w;
  }

  p.mem_init = Tensor({m, d});
  p.miu_init = Tensor({m, h});
  if (hyper.init_scale > 0.0) {
    fill_uniform(p.mem_init, rng, hyper.init_scale);
    fill_uniform(p.miu_init, rng, hyper.init_scale);
  }
  return p;
}

ParamList ModelParams::param_list() {
  ParamList list = {
      {"emb.item", &item_emb},
      {"emb.cat", &cat_emb},
      {"ctrl.read_key.w", &w_read_key},
      {"ctrl.read_key.b", &b_read_key},
      {"ctrl.write_key.w", &w_write_key},
      {"ctrl.write_key.b", &b_write_key},
      {"ctrl.add.w", &w_add},
      {"ctrl.add.b", &b_add},
      {"ctrl.erase.w", &w_erase},
      {"ctrl.erase.b", &b_erase},
      {"mur.transfer", &w_transfer},
      {"miu.gru.wu", &gru_wu},
      {"miu.gru.uu", &gru_uu},
      {"miu.gru.bu", &gru_bu},
      {"miu.gru.wr", &gru_wr},
      {"miu.gru.ur", &gru_ur},
      {"miu.gru.br", &gru_br},
      {"miu.gru.wc", &gru_wc},
      {"miu.gru.uc", &gru_uc},
      {"miu.gru.bc", &gru_bc},
  };
  for (size_t i = 0; i < mlp_w.size(); ++i) {
    list.push_back({"mlp." + std::to_string(i) + ".w", &mlp_w[i]});
    list.push_back({"mlp." + std::to_string(i) + ".b", &mlp_b[i]});
  }
  list.push_back({"init.mem", &mem_init, /*trainable=*/false});
  list.push_back({"init.miu", &miu_init, /*trainable=*/false});
  return list;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  auto list = const_cast<ModelParams*>(this)->param_list();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(list.size());
  for (const auto& p : list) out.emplace_back(p.name, p.tensor);
  return out;
}

BaselineParams BaselineParams::init(const HyperParams& hyper, int n_items, int n_cats,
                                    Rng& rng) {
  hyper.validate();
  MIMN_CHECK(n_items >= 2 && n_cats >= 2, "vocabulary must have at least one real id");
  BaselineParams p;
  p.hyper = hyper;
  p.n_items = n_items;
  p.n_cats = n_cats;
  int d = hyper.width;
  p.item_emb = Tensor({n_items, d});
  p.cat_emb = Tensor({n_cats, d});
  fill_uniform(p.item_emb, rng, 0.05);
  fill_uniform(p.cat_emb, rng, 0.05);
  int in = hyper.baseline_feature_dim();
  for (int w : hyper.mlp_widths) {
    p.mlp_w.push_back(glorot(w, in, rng));
    p.mlp_b.push_back(Tensor({w}));
    in = w;
  }
  return p;
}

ParamList BaselineParams::param_list() {
  ParamList list = {
      {"emb.item", &item_emb},
      {"emb.cat", &cat_emb},
  };
  for (size_t i = 0; i < mlp_w.size(); ++i) {
    list.push_back({"mlp." + std::to_string(i) + ".w", &mlp_w[i]});
    list.push_back({"mlp." + std::to_string(i) + ".b", &mlp_b[i]});
  }
  return list;
}

std::vector<std::pair<std::string, const Tensor*>> BaselineParams::named_tensors() const {
  auto list = const_cast<BaselineParams*>(this)->param_list();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(list.size());
  for (const auto& p : list) out.emplace_back(p.name, p.tensor);
  return out;
}

}  // namespace mimn
