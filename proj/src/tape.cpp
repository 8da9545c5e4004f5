#include "mimn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace mimn {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddConst: return "add_const";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kCosine: return "cosine";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReduceSum: return "reduce_sum";
    case OpKind::kSumRows: return "sum_rows";
    case OpKind::kOuter: return "outer";
    case OpKind::kRow: return "row";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kSoftmaxXent: return "softmax_xent";
  }
  return "?";
}

namespace {

void require_same_shape(OpKind k, const Tensor& a, const Tensor& b) {
  MIMN_CHECK(a.same_shape(b), std::string(op_name(k)) + ": shape mismatch " +
                                  shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_vector(OpKind k, const Tensor& a) {
  MIMN_CHECK(a.rank() == 1, std::string(op_name(k)) + ": expected vector, got " +
                                shape_str(a.shape()));
}

Tensor softmax_value(const Tensor& x) {
  Tensor y(x.shape());
  double mx = x[0];
  for (int i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
  double z = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    z += y[i];
  }
  for (int i = 0; i < y.size(); ++i) y[i] /= z;
  return y;
}

double norm(const Tensor& a) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Tape::NodeId Tape::push(Node n) {
  MIMN_CHECK(!has_grads_, "tape already differentiated; build a fresh tape");
  n.value = compute(n);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor Tape::compute(const Node& n) const {
  auto val = [this](int id) -> const Tensor& { return nodes_[static_cast<size_t>(id)].value; };
  switch (n.kind) {
    case OpKind::kLeaf:
      return n.value;
    case OpKind::kMatmul: {
      const Tensor& a = val(n.a);
      const Tensor& b = val(n.b);
      MIMN_CHECK(a.rank() == 2, "matmul: lhs must be rank-2, got " + shape_str(a.shape()));
      int r = a.rows(), k = a.cols();
      if (b.rank() == 1) {
        MIMN_CHECK(b.size() == k, "matmul: shape mismatch " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()));
        Tensor y({r});
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < k; ++j) s += a.at(i, j) * b[j];
          y[i] = s;
        }
        return y;
      }
      MIMN_CHECK(b.rank() == 2 && b.rows() == k, "matmul: shape mismatch " +
                                                     shape_str(a.shape()) + " x " +
                                                     shape_str(b.shape()));
      int c = b.cols();
      Tensor y({r, c});
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < k; ++j) {
          double aij = a.at(i, j);
          for (int l = 0; l < c; ++l) y.at(i, l) += aij * b.at(j, l);
        }
      return y;
    }
    case OpKind::kAdd: {
      const Tensor& a = val(n.a);
      const Tensor& b = val(n.b);
      require_same_shape(n.kind, a, b);
      Tensor y = a;
      for (int i = 0; i < y.size(); ++i) y[i] += b[i];
      return y;
    }
    case OpKind::kSub: {
      const Tensor& a = val(n.a);
      const Tensor& b = val(n.b);
      require_same_shape(n.kind, a, b);
      Tensor y = a;
      for (int i = 0; i < y.size(); ++i) y[i] -= b[i];
      return y;
    }
    case OpKind::kMul: {
      const Tensor& a = val(n.a);
      const Tensor& b = val(n.b);
      require_same_shape(n.kind, a, b);
      Tensor y = a;
      for (int i = 0; i < y.size(); ++i) y[i] *= b[i];
      return y;
    }
    case OpKind::kScale: {
      Tensor y = val(n.a);
      for (int i = 0; i < y.size(); ++i) y[i] *= n.alpha;
      return y;
    }
    case OpKind::kAddConst: {
      Tensor y = val(n.a);
      for (int i = 0; i < y.size(); ++i) y[i] += n.alpha;
      return y;
    }
    case OpKind::kSoftmax: {
      const Tensor& x = val(n.a);
      require_vector(n.kind, x);
      return softmax_value(x);
    }
    case OpKind::kSigmoid: {
      Tensor y = val(n.a);
      for (int i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
      return y;
    }
    case OpKind::kTanh: {
      Tensor y = val(n.a);
      for (int i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
      return y;
    }
    case OpKind::kCosine: {
      const Tensor& a = val(n.a);
      const Tensor& b = val(n.b);
      require_vector(n.kind, a);
      require_same_shape(n.kind, a, b);
      double d = dot(a, b);
      return Tensor::scalar(d / ((norm(a) + kNormEps) * (norm(b) + kNormEps)));
    }
    case OpKind::kConcat: {
      int total = 0;
      for (int id : n.inputs) {
        require_vector(n.kind, val(id));
        total += val(id).size();
      }
      Tensor y({total});
      int o = 0;
      for (int id : n.inputs)
        for (int i = 0; i < val(id).size(); ++i) y[o++] = val(id)[i];
      return y;
    }
    case OpKind::kSlice: {
      const Tensor& x = val(n.a);
      require_vector(n.kind, x);
      MIMN_CHECK(n.i0 >= 0 && n.i1 > 0 && n.i0 + n.i1 <= x.size(),
                 "slice: range [" + std::to_string(n.i0) + "," +
                     std::to_string(n.i0 + n.i1) + ") out of " + shape_str(x.shape()));
      Tensor y({n.i1});
      for (int i = 0; i < n.i1; ++i) y[i] = x[n.i0 + i];
      return y;
    }
    case OpKind::kReduceSum: {
      const Tensor& x = val(n.a);
      double s = 0.0;
      for (int i = 0; i < x.size(); ++i) s += x[i];
      return Tensor::scalar(s);
    }
    case OpKind::kSumRows: {
      const Tensor& m = val(n.a);
      MIMN_CHECK(m.rank() == 2, "sum_rows: expected matrix, got " + shape_str(m.shape()));
      Tensor y({m.cols()});
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) y[j] += m.at(i, j);
      return y;
    }
    case OpKind::kOuter: {
      const Tensor& u = val(n.a);
      const Tensor& v = val(n.b);
      require_vector(n.kind, u);
      require_vector(n.kind, v);
      Tensor y({u.size(), v.size()});
      for (int i = 0; i < u.size(); ++i)
        for (int j = 0; j < v.size(); ++j) y.at(i, j) = u[i] * v[j];
      return y;
    }
    case OpKind::kRow: {
      const Tensor& m = val(n.a);
      MIMN_CHECK(m.rank() == 2, "row: expected matrix, got " + shape_str(m.shape()));
      MIMN_CHECK(n.i0 >= 0 && n.i0 < m.rows(),
                 "row: index " + std::to_string(n.i0) + " out of " + shape_str(m.shape()));
      Tensor y({m.cols()});
      for (int j = 0; j < m.cols(); ++j) y[j] = m.at(n.i0, j);
      return y;
    }
    case OpKind::kStackRows: {
      MIMN_CHECK(!n.inputs.empty(), "stack_rows: no rows");
      int c = val(n.inputs[0]).size();
      Tensor y({static_cast<int>(n.inputs.size()), c});
      for (size_t i = 0; i < n.inputs.size(); ++i) {
        const Tensor& r = val(n.inputs[i]);
        require_vector(n.kind, r);
        MIMN_CHECK(r.size() == c, "stack_rows: ragged widths");
        for (int j = 0; j < c; ++j) y.at(static_cast<int>(i), j) = r[j];
      }
      return y;
    }
    case OpKind::kBroadcast: {
      const Tensor& x = val(n.a);
      MIMN_CHECK(x.size() == 1, "broadcast: expected scalar, got " + shape_str(x.shape()));
      Tensor y({n.i0});
      for (int i = 0; i < n.i0; ++i) y[i] = x[0];
      return y;
    }
    case OpKind::kSoftmaxXent: {
      const Tensor& x = val(n.a);
      require_vector(n.kind, x);
      MIMN_CHECK(n.i0 >= 0 && n.i0 < x.size(),
                 "softmax_xent: label " + std::to_string(n.i0) + " out of " +
                     shape_str(x.shape()));
      // -log softmax(x)[label], computed via log-sum-exp.
      double mx = x[0];
      for (int i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
      double z = 0.0;
      for (int i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
      return Tensor::scalar(std::log(z) + mx - x[n.i0]);
    }
  }
  fail("unhandled op");
}

Tape::NodeId Tape::leaf(Tensor value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  MIMN_CHECK(!has_grads_, "tape already differentiated; build a fresh tape");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::param(const std::string& name, const Tensor& value) {
  NodeId id = leaf(value);
  nodes_.back().name = name;
  return id;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kMatmul;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}
Tape::NodeId Tape::add(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}
Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kSub;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}
Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kMul;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}
Tape::NodeId Tape::scale(NodeId a, double alpha) {
  Node n;
  n.kind = OpKind::kScale;
  n.a = a;
  n.alpha = alpha;
  return push(std::move(n));
}
Tape::NodeId Tape::add_const(NodeId a, double alpha) {
  Node n;
  n.kind = OpKind::kAddConst;
  n.a = a;
  n.alpha = alpha;
  return push(std::move(n));
}
Tape::NodeId Tape::softmax(NodeId v) {
  Node n;
  n.kind = OpKind::kSoftmax;
  n.a = v;
  return push(std::move(n));
}
Tape::NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.a = a;
  return push(std::move(n));
}
Tape::NodeId Tape::tanh_(NodeId a) {
  Node n;
  n.kind = OpKind::kTanh;
  n.a = a;
  return push(std::move(n));
}
Tape::NodeId Tape::cosine(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kCosine;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}
Tape::NodeId Tape::concat(const std::vector<NodeId>& parts) {
  MIMN_CHECK(!parts.empty(), "concat: no inputs");
  Node n;
  n.kind = OpKind::kConcat;
  n.inputs = parts;
  return push(std::move(n));
}
Tape::NodeId Tape::slice(NodeId v, int start, int len) {
  Node n;
  n.kind = OpKind::kSlice;
  n.a = v;
  n.i0 = start;
  n.i1 = len;
  return push(std::move(n));
}
Tape::NodeId Tape::reduce_sum(NodeId a) {
  Node n;
  n.kind = OpKind::kReduceSum;
  n.a = a;
  return push(std::move(n));
}
Tape::NodeId Tape::sum_rows(NodeId m) {
  Node n;
  n.kind = OpKind::kSumRows;
  n.a = m;
  return push(std::move(n));
}
Tape::NodeId Tape::outer(NodeId u, NodeId v) {
  Node n;
  n.kind = OpKind::kOuter;
  n.a = u;
  n.b = v;
  return push(std::move(n));
}
Tape::NodeId Tape::row(NodeId m, int i) {
  Node n;
  n.kind = OpKind::kRow;
  n.a = m;
  n.i0 = i;
  return push(std::move(n));
}
Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& rows) {
  Node n;
  n.kind = OpKind::kStackRows;
  n.inputs = rows;
  return push(std::move(n));
}
Tape::NodeId Tape::broadcast(NodeId scalar, int len) {
  Node n;
  n.kind = OpKind::kBroadcast;
  n.a = scalar;
  n.i0 = len;
  return push(std::move(n));
}
Tape::NodeId Tape::softmax_xent(NodeId logits, int label) {
  Node n;
  n.kind = OpKind::kSoftmaxXent;
  n.a = logits;
  n.i0 = label;
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  MIMN_CHECK(loss >= 0 && loss < node_count(), "backward: bad loss node");
  MIMN_CHECK(value(loss).size() == 1,
             "backward: loss must be scalar, got " + shape_str(value(loss).shape()));
  grads_.assign(nodes_.size(), Tensor());
  auto g = [this](int id) -> Tensor& {
    Tensor& t = grads_[static_cast<size_t>(id)];
    if (t.size() == 0) t = Tensor(nodes_[static_cast<size_t>(id)].value.shape());
    return t;
  };
  g(loss)[0] = 1.0;

  for (int id = loss; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& gy = grads_[static_cast<size_t>(id)];
    if (gy.size() == 0) continue;  // not on any path to the loss
    switch (n.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatmul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        Tensor& ga = g(n.a);
        Tensor& gb = g(n.b);
        int r = a.rows(), k = a.cols();
        if (b.rank() == 1) {
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < k; ++j) {
              ga.at(i, j) += gy[i] * b[j];
              gb[j] += gy[i] * a.at(i, j);
            }
        } else {
          int c = b.cols();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < k; ++j) {
              double s = 0.0;
              for (int l = 0; l < c; ++l) {
                s += gy.at(i, l) * b.at(j, l);
                gb.at(j, l) += gy.at(i, l) * a.at(i, j);
              }
              ga.at(i, j) += s;
            }
        }
        break;
      }
      case OpKind::kAdd: {
        Tensor& ga = g(n.a);
        Tensor& gb = g(n.b);
        for (int i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] += gy[i];
        }
        break;
      }
      case OpKind::kSub: {
        Tensor& ga = g(n.a);
        Tensor& gb = g(n.b);
        for (int i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i];
          gb[i] -= gy[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        Tensor& ga = g(n.a);
        Tensor& gb = g(n.b);
        for (int i = 0; i < gy.size(); ++i) {
          ga[i] += gy[i] * b[i];
          gb[i] += gy[i] * a[i];
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& ga = g(n.a);
        for (int i = 0; i < gy.size(); ++i) ga[i] += gy[i] * n.alpha;
        break;
      }
      case OpKind::kAddConst: {
        Tensor& ga = g(n.a);
        for (int i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        break;
      }
      case OpKind::kSoftmax: {
        const Tensor& y = n.value;
        Tensor& ga = g(n.a);
        double s = 0.0;
        for (int i = 0; i < y.size(); ++i) s += gy[i] * y[i];
        for (int i = 0; i < y.size(); ++i) ga[i] += y[i] * (gy[i] - s);
        break;
      }
      case OpKind::kSigmoid: {
        const Tensor& y = n.value;
        Tensor& ga = g(n.a);
        for (int i = 0; i < y.size(); ++i) ga[i] += gy[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case OpKind::kTanh: {
        const Tensor& y = n.value;
        Tensor& ga = g(n.a);
        for (int i = 0; i < y.size(); ++i) ga[i] += gy[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case OpKind::kCosine: {
        const Tensor& a = value(n.a);
        const Tensor& b = value(n.b);
        Tensor& ga = g(n.a);
        Tensor& gb = g(n.b);
        double na = norm(a), nb = norm(b);
        double pa = na + kNormEps, pb = nb + kNormEps;
        double s = dot(a, b);
        double d = gy[0];
        // d/da [ s / (pa*pb) ] = b/(pa*pb) - s/(pa^2*pb) * a/na
        double ca = (na > 0.0) ? s / (pa * pa * pb * na) : 0.0;
        double cb = (nb > 0.0) ? s / (pb * pb * pa * nb) : 0.0;
        for (int i = 0; i < a.size(); ++i) {
          ga[i] += d * (b[i] / (pa * pb) - ca * a[i]);
          gb[i] += d * (a[i] / (pa * pb) - cb * b[i]);
        }
        break;
      }
      case OpKind::kConcat: {
        int o = 0;
        for (int id2 : n.inputs) {
          Tensor& gi = g(id2);
          for (int i = 0; i < gi.size(); ++i) gi[i] += gy[o + i];
          o += gi.size();
        }
        break;
      }
      case OpKind::kSlice: {
        Tensor& ga = g(n.a);
        for (int i = 0; i < n.i1; ++i) ga[n.i0 + i] += gy[i];
        break;
      }
      case OpKind::kReduceSum: {
        Tensor& ga = g(n.a);
        for (int i = 0; i < ga.size(); ++i) ga[i] += gy[0];
        break;
      }
      case OpKind::kSumRows: {
        const Tensor& m = value(n.a);
        Tensor& ga = g(n.a);
        for (int i = 0; i < m.rows(); ++i)
          for (int j = 0; j < m.cols(); ++j) ga.at(i, j) += gy[j];
        break;
      }
      case OpKind::kOuter: {
        const Tensor& u = value(n.a);
        const Tensor& v = value(n.b);
        Tensor& gu = g(n.a);
        Tensor& gv = g(n.b);
        for (int i = 0; i < u.size(); ++i)
          for (int j = 0; j < v.size(); ++j) {
            gu[i] += gy.at(i, j) * v[j];
            gv[j] += gy.at(i, j) * u[i];
          }
        break;
      }
      case OpKind::kRow: {
        Tensor& ga = g(n.a);
        int c = value(n.a).cols();
        for (int j = 0; j < c; ++j) ga.at(n.i0, j) += gy[j];
        break;
      }
      case OpKind::kStackRows: {
        int c = value(id).cols();
        for (size_t i = 0; i < n.inputs.size(); ++i) {
          Tensor& gi = g(n.inputs[i]);
          for (int j = 0; j < c; ++j) gi[j] += gy.at(static_cast<int>(i), j);
        }
        break;
      }
      case OpKind::kBroadcast: {
        Tensor& ga = g(n.a);
        for (int i = 0; i < gy.size(); ++i) ga[0] += gy[i];
        break;
      }
      case OpKind::kSoftmaxXent: {
        const Tensor& x = value(n.a);
        Tensor p = softmax_value(x);
        Tensor& ga = g(n.a);
        for (int i = 0; i < x.size(); ++i)
          ga[i] += gy[0] * (p[i] - (i == n.i0 ? 1.0 : 0.0));
        break;
      }
    }
  }
  has_grads_ = true;
}

Tensor Tape::grad(NodeId id) const {
  MIMN_CHECK(has_grads_, "grad: backward() not run");
  const Tensor& t = grads_[static_cast<size_t>(id)];
  if (t.size() == 0) return Tensor(nodes_[static_cast<size_t>(id)].value.shape());
  return t;
}

GradientSet Tape::grads() const {
  MIMN_CHECK(has_grads_, "grads: backward() not run");
  GradientSet out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind != OpKind::kLeaf || n.name.empty()) continue;
    const Tensor& t = grads_[i];
    auto [it, fresh] = out.emplace(n.name, t.size() ? t : Tensor(n.value.shape()));
    if (!fresh) {
      // Same parameter bound to several leaves: sum the contributions.
      Tensor& acc = it->second;
      if (t.size())
        for (int j = 0; j < acc.size(); ++j) acc[j] += t[j];
    }
  }
  return out;
}

void Tape::accumulate_grads(GradientSet& into) const {
  MIMN_CHECK(has_grads_, "accumulate_grads: backward() not run");
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind != OpKind::kLeaf || n.name.empty()) continue;
    auto [it, fresh] = into.try_emplace(n.name, Tensor(n.value.shape()));
    const Tensor& t = grads_[i];
    if (t.size() == 0) continue;
    Tensor& acc = it->second;
    MIMN_CHECK(acc.same_shape(t), "accumulate_grads: shape drift for " + n.name);
    for (int j = 0; j < acc.size(); ++j) acc[j] += t[j];
  }
}

bool Tape::replay_matches() {
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind == OpKind::kLeaf) continue;
    Tensor again = compute(n);
    if (!(again == n.value)) return false;
  }
  return true;
}

}  // namespace mimn
