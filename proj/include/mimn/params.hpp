#pragma once

#include "mimn/gradcheck.hpp"
#include "mimn/hyper.hpp"
#include "mimn/tensor.hpp"

namespace mimn {

// All trainable tensors of the memory model, plus the fixed memory
// initialization. Vocabulary row 0 of both embedding tables is the
// out-of-vocabulary id.
struct ModelParams {
  HyperParams hyper;
  int n_items = 0;  // embedding rows, OOV row included
  int n_cats = 0;

  Tensor item_emb;  // {n_items, d}
  Tensor cat_emb;   // {n_cats, d}

  // Controller heads: independent affine projections of the event embedding.
  Tensor w_read_key, b_read_key;    // {d,d}, {d}
  Tensor w_write_key, b_write_key;  // {d,d}, {d}
  Tensor w_add, b_add;              // {d,d}, {d}  (tanh)
  Tensor w_erase, b_erase;          // {d,d}, {d}  (sigmoid)

  Tensor w_transfer;  // {m,m} write-weight rebalancing parameters

  // Induction-unit GRU, shared across channels. Input is the written memory
  // row concatenated with the event embedding (2d), hidden width h.
  Tensor gru_wu, gru_uu, gru_bu;  // update gate
  Tensor gru_wr, gru_ur, gru_br;  // reset gate
  Tensor gru_wc, gru_uc, gru_bc;  // candidate

  std::vector<Tensor> mlp_w, mlp_b;  // prediction head

  // Canonical memory initialization (not trained; every cold-start state
  // copies these).
  Tensor mem_init;  // {m,d}
  Tensor miu_init;  // {m,h}

  static ModelParams init(const HyperParams& hyper, int n_items, int n_cats, Rng& rng);

  // Stable enumeration used by the optimizer, checkpoints and the gradient
  // checker. Order is fixed.
  ParamList param_list();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  // True for parameters the sequence states do not depend on (the prediction
  // head); lets loss evaluators reuse cached sequence work.
  static bool head_param(const std::string& name) { return name.rfind("mlp.", 0) == 0; }
};

// The sum-pooling reference model: shared embedding scheme, no memory.
struct BaselineParams {
  HyperParams hyper;
  int n_items = 0;
  int n_cats = 0;
  Tensor item_emb, cat_emb;
  std::vector<Tensor> mlp_w, mlp_b;

  static BaselineParams init(const HyperParams& hyper, int n_items, int n_cats, Rng& rng);
  ParamList param_list();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  static bool head_param(const std::string& name) { return name.rfind("mlp.", 0) == 0; }
};

}  // namespace mimn
