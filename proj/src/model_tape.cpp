#include "mimn/model_tape.hpp"

namespace mimn {

namespace {

using NodeId = Tape::NodeId;

struct MimnLeaves {
  NodeId item_emb, cat_emb;
  NodeId w_kr, b_kr, w_kw, b_kw, w_a, b_a, w_e, b_e;
  NodeId transfer;
  NodeId gwu, guu, gbu, gwr, gur, gbr, gwc, guc, gbc;
  std::vector<NodeId> mlp_w, mlp_b;
  NodeId mem_init, miu_init;
};

MimnLeaves bind_params(Tape& t, const ModelParams& p) {
  MimnLeaves l;
  l.item_emb = t.param("emb.item", p.item_emb);
  l.cat_emb = t.param("emb.cat", p.cat_emb);
  l.w_kr = t.param("ctrl.read_key.w", p.w_read_key);
  l.b_kr = t.param("ctrl.read_key.b", p.b_read_key);
  l.w_kw = t.param("ctrl.write_key.w", p.w_write_key);
  l.b_kw = t.param("ctrl.write_key.b", p.b_write_key);
  l.w_a = t.param("ctrl.add.w", p.w_add);
  l.b_a = t.param("ctrl.add.b", p.b_add);
  l.w_e = t.param("ctrl.erase.w", p.w_erase);
  l.b_e = t.param("ctrl.erase.b", p.b_erase);
  l.transfer = t.param("mur.transfer", p.w_transfer);
  l.gwu = t.param("miu.gru.wu", p.gru_wu);
  l.guu = t.param("miu.gru.uu", p.gru_uu);
  l.gbu = t.param("miu.gru.bu", p.gru_bu);
  l.gwr = t.param("miu.gru.wr", p.gru_wr);
  l.gur = t.param("miu.gru.ur", p.gru_ur);
  l.gbr = t.param("miu.gru.br", p.gru_br);
  l.gwc = t.param("miu.gru.wc", p.gru_wc);
  l.guc = t.param("miu.gru.uc", p.gru_uc);
  l.gbc = t.param("miu.gru.bc", p.gru_bc);
  for (size_t i = 0; i < p.mlp_w.size(); ++i) {
    l.mlp_w.push_back(t.param("mlp." + std::to_string(i) + ".w", p.mlp_w[i]));
    l.mlp_b.push_back(t.param("mlp." + std::to_string(i) + ".b", p.mlp_b[i]));
  }
  // Memory initialization enters the graph as plain leaves: it shapes the
  // forward values but is not trained.
  l.mem_init = t.leaf(p.mem_init);
  l.miu_init = t.leaf(p.miu_init);
  return l;
}

NodeId affine(Tape& t, NodeId w, NodeId b, NodeId x) {
  return t.add(t.matmul(w, x), b);
}

NodeId gru_step(Tape& t, const MimnLeaves& l, NodeId s, NodeId x) {
  NodeId u = t.sigmoid(t.add(affine(t, l.gwu, l.gbu, x), t.matmul(l.guu, s)));
  NodeId r = t.sigmoid(t.add(affine(t, l.gwr, l.gbr, x), t.matmul(l.gur, s)));
  NodeId c = t.tanh_(t.add(affine(t, l.gwc, l.gbc, x), t.matmul(l.guc, t.mul(r, s))));
  NodeId keep = t.add_const(t.scale(u, -1.0), 1.0);  // 1 - u
  return t.add(t.mul(keep, s), t.mul(u, c));
}

NodeId content_weights_node(Tape& t, NodeId memory, NodeId key, int m) {
  std::vector<NodeId> sims;
  sims.reserve(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) sims.push_back(t.cosine(key, t.row(memory, i)));
  return t.softmax(t.concat(sims));
}

NodeId mlp_logits(Tape& t, const std::vector<NodeId>& ws, const std::vector<NodeId>& bs,
                  NodeId feat) {
  NodeId x = feat;
  for (size_t lyr = 0; lyr < ws.size(); ++lyr) {
    x = affine(t, ws[lyr], bs[lyr], x);
    if (lyr + 1 < ws.size()) x = t.tanh_(x);
  }
  return x;
}

}  // namespace

SampleGraph build_sample_loss(const ModelParams& p, const SampleView& s) {
  MIMN_CHECK(!s.history.empty(), "sample has empty history");
  const HyperParams& h = p.hyper;
  int m = h.slots, d = h.width;

  SampleGraph g;
  Tape& t = g.tape;
  MimnLeaves l = bind_params(t, p);

  NodeId memory = l.mem_init;
  NodeId channels = l.miu_init;
  NodeId usage = t.leaf(Tensor({m}));
  NodeId w_sum = t.leaf(Tensor({m}));

  for (const auto& [item, cat] : s.history) {
    MIMN_CHECK(item >= 0 && item < p.n_items && cat >= 0 && cat < p.n_cats,
               "behavior id out of vocabulary");
    NodeId emb = t.add(t.row(l.item_emb, item), t.row(l.cat_emb, cat));
    NodeId key_r = affine(t, l.w_kr, l.b_kr, emb);
    NodeId key_w = affine(t, l.w_kw, l.b_kw, emb);
    NodeId add_v = t.tanh_(affine(t, l.w_a, l.b_a, emb));
    NodeId erase_v = t.sigmoid(affine(t, l.w_e, l.b_e, emb));

    NodeId w_read = content_weights_node(t, memory, key_r, m);
    NodeId w_write = content_weights_node(t, memory, key_w, m);

    NodeId w_tilde = w_write;
    if (h.use_mur) {
      NodeId transfer = t.softmax(t.matmul(l.transfer, usage));
      w_tilde = t.mul(w_write, transfer);
    }

    // (1 - w⊗e) ⊙ M + w⊗a
    NodeId erase_m = t.outer(w_tilde, erase_v);
    NodeId keep = t.add_const(t.scale(erase_m, -1.0), 1.0);
    memory = t.add(t.mul(keep, memory), t.outer(w_tilde, add_v));

    usage = t.add(usage, w_tilde);
    w_sum = t.add(w_sum, w_tilde);

    if (h.use_miu) {
      std::vector<int> picks;
      kern::top_k_indices(t.value(w_read).data().data(), m, h.k_top, picks);
      std::vector<NodeId> rows;
      rows.reserve(static_cast<size_t>(m));
      size_t next = 0;
      for (int i = 0; i < m; ++i) {
        if (next < picks.size() && picks[next] == i) {
          ++next;
          NodeId x = t.concat({t.row(memory, i), emb});
          rows.push_back(gru_step(t, l, t.row(channels, i), x));
        } else {
          rows.push_back(t.row(channels, i));
        }
      }
      channels = t.stack_rows(rows);
    }
  }

  std::vector<NodeId> feat_parts = {t.sum_rows(memory), t.sum_rows(channels),
                                    t.row(l.item_emb, s.target_item),
                                    t.row(l.cat_emb, s.target_cat)};
  if (h.profile_dim > 0) {
    MIMN_CHECK(static_cast<int>(s.profile.size()) == h.profile_dim,
               "profile feature width mismatch");
    feat_parts.push_back(t.leaf(Tensor::vec({s.profile.begin(), s.profile.end()})));
  }
  NodeId feat = t.concat(feat_parts);
  g.logits = mlp_logits(t, l.mlp_w, l.mlp_b, feat);
  g.xent = t.softmax_xent(g.logits, s.label);

  if (h.use_mur && h.lambda > 0.0) {
    NodeId mean = t.scale(t.reduce_sum(w_sum), 1.0 / m);
    NodeId diff = t.sub(w_sum, t.broadcast(mean, m));
    g.reg = t.scale(t.reduce_sum(t.mul(diff, diff)), h.lambda);
    g.loss = t.add(g.xent, g.reg);
  } else {
    g.loss = g.xent;
  }
  g.w_sum = w_sum;
  g.final_memory = memory;
  g.final_channels = channels;
  return g;
}

SampleGraph build_baseline_loss(const BaselineParams& p, const SampleView& s) {
  MIMN_CHECK(!s.history.empty(), "sample has empty history");
  const HyperParams& h = p.hyper;

  SampleGraph g;
  Tape& t = g.tape;
  NodeId item_emb = t.param("emb.item", p.item_emb);
  NodeId cat_emb = t.param("emb.cat", p.cat_emb);
  std::vector<NodeId> ws, bs;
  for (size_t i = 0; i < p.mlp_w.size(); ++i) {
    ws.push_back(t.param("mlp." + std::to_string(i) + ".w", p.mlp_w[i]));
    bs.push_back(t.param("mlp." + std::to_string(i) + ".b", p.mlp_b[i]));
  }

  NodeId pool = -1;
  for (const auto& [item, cat] : s.history) {
    NodeId emb = t.add(t.row(item_emb, item), t.row(cat_emb, cat));
    pool = (pool < 0) ? emb : t.add(pool, emb);
  }
  std::vector<NodeId> feat_parts = {pool, t.row(item_emb, s.target_item),
                                    t.row(cat_emb, s.target_cat)};
  if (h.profile_dim > 0) {
    MIMN_CHECK(static_cast<int>(s.profile.size()) == h.profile_dim,
               "profile feature width mismatch");
    feat_parts.push_back(t.leaf(Tensor::vec({s.profile.begin(), s.profile.end()})));
  }
  NodeId feat = t.concat(feat_parts);
  g.logits = mlp_logits(t, ws, bs, feat);
  g.xent = t.softmax_xent(g.logits, s.label);
  g.loss = g.xent;
  return g;
}

}  // namespace mimn
