#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mimn/checkpoint.hpp"
#include "mimn/loss_eval.hpp"
#include "mimn/model.hpp"

namespace py = pybind11;
using namespace mimn;

namespace {

Tensor tensor_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int> shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i)
    shape.push_back(static_cast<int>(a.shape(i)));
  MIMN_CHECK(!shape.empty() && shape.size() <= 2, "expected a 1-D or 2-D array");
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

py::array_t<double> array_from(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

}  // namespace

Tensor bind_tensor_from(const py::array& a) {
  return tensor_from(py::array_t<double, py::array::c_style | py::array::forcecast>(a));
}
py::array bind_array_from(const Tensor& t) { return array_from(t); }

void bind_model(py::module_& m) {
  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("slots", &HyperParams::slots)
      .def_readwrite("width", &HyperParams::width)
      .def_readwrite("miu_width", &HyperParams::miu_width)
      .def_readwrite("k_top", &HyperParams::k_top)
      .def_readwrite("lam", &HyperParams::lambda)
      .def_readwrite("mlp_widths", &HyperParams::mlp_widths)
      .def_readwrite("profile_dim", &HyperParams::profile_dim)
      .def_readwrite("init_scale", &HyperParams::init_scale)
      .def_readwrite("use_mur", &HyperParams::use_mur)
      .def_readwrite("use_miu", &HyperParams::use_miu)
      .def("validate", &HyperParams::validate);

  py::class_<UserInterestState>(m, "UserInterestState")
      .def_property_readonly("memory",
                             [](const UserInterestState& s) { return array_from(s.memory); })
      .def_property_readonly("channels",
                             [](const UserInterestState& s) { return array_from(s.channels); })
      .def_property_readonly("usage",
                             [](const UserInterestState& s) { return array_from(s.usage); })
      .def_readonly("events", &UserInterestState::events)
      .def_readonly("version", &UserInterestState::version)
      .def("__eq__", [](const UserInterestState& a, const UserInterestState& b) { return a == b; });

  py::class_<ModelParams>(m, "ModelParams")
      .def_static(
          "init",
          [](const HyperParams& h, int n_items, int n_cats, std::uint64_t seed) {
            Rng rng(seed);
            return ModelParams::init(h, n_items, n_cats, rng);
          },
          py::arg("hyper"), py::arg("n_items"), py::arg("n_categories"), py::arg("seed") = 1)
      .def_property_readonly("hyper", [](const ModelParams& p) { return p.hyper; })
      .def("tensor",
           [](const ModelParams& p, const std::string& name) {
             for (auto [n, t] : p.named_tensors())
               if (n == name) return array_from(*t);
             fail("unknown parameter tensor: " + name);
           })
      .def("tensor_names", [](const ModelParams& p) {
        std::vector<std::string> names;
        for (auto [n, t] : p.named_tensors()) names.push_back(n);
        return names;
      });

  m.def("cold_start_state", &cold_start_state, py::arg("params"), py::arg("version") = 0);

  m.def(
      "memory_read",
      [](const py::array& memory, const py::array& key) {
        ReadResult r = memory_read(bind_tensor_from(memory), bind_tensor_from(key));
        return py::make_tuple(array_from(r.weights), array_from(r.readout));
      },
      py::arg("memory"), py::arg("read_key"),
      "Content addressing: (weights, readout) for a key against the slot matrix");

  m.def(
      "memory_write",
      [](const py::array& memory, const py::array& w, const py::array& erase,
         const py::array& add) {
        return array_from(memory_write(bind_tensor_from(memory), bind_tensor_from(w),
                                       bind_tensor_from(erase), bind_tensor_from(add)));
      },
      py::arg("memory"), py::arg("write_weight"), py::arg("erase"), py::arg("add"));

  m.def(
      "rebalance_write_weight",
      [](const py::array& w, const py::array& usage, const py::array& transfer) {
        return array_from(rebalance_write_weight(bind_tensor_from(w), bind_tensor_from(usage),
                                                 bind_tensor_from(transfer)));
      },
      py::arg("write_weight"), py::arg("usage"), py::arg("transfer"));

  m.def(
      "utilization_reg_loss",
      [](const py::array& w_sum, double lam) {
        return utilization_reg_loss(bind_tensor_from(w_sum), lam);
      },
      py::arg("w_sum"), py::arg("lam"));

  m.def(
      "miu_update",
      [](const ModelParams& p, const py::array& channels, const py::array& memory,
         const py::array& read_weights, const py::array& emb, int k_top) {
        return array_from(miu_update(p, bind_tensor_from(channels), bind_tensor_from(memory),
                                     bind_tensor_from(read_weights), bind_tensor_from(emb),
                                     k_top));
      },
      py::arg("params"), py::arg("channels"), py::arg("memory"), py::arg("read_weights"),
      py::arg("emb"), py::arg("k_top"));

  m.def(
      "step_event",
      [](const ModelParams& p, UserInterestState state, int item, int cat) {
        step_event(p, state, item, cat);
        return state;
      },
      py::arg("params"), py::arg("state"), py::arg("item"), py::arg("category"),
      "One incremental update; returns the advanced state");

  m.def(
      "process_sequence",
      [](const ModelParams& p, const std::vector<std::pair<int, int>>& events) {
        SequenceResult r = process_sequence(p, events);
        return py::make_tuple(r.state, array_from(r.w_sum));
      },
      py::arg("params"), py::arg("events"),
      "Fold the per-event update over a whole sequence from cold start");

  m.def(
      "predict",
      [](const ModelParams& p, const UserInterestState& s, int item, int cat) {
        return predict(p, s, item, cat);
      },
      py::arg("params"), py::arg("state"), py::arg("item"), py::arg("category"),
      "Click probability for one candidate against a fixed-size state");

  m.def(
      "gradcheck",
      [](const ModelParams& p, const std::vector<std::pair<std::vector<std::pair<int, int>>,
                                                           std::pair<std::pair<int, int>, int>>>&
             batch,
         double step, int threads) {
        std::vector<Sample> samples;
        for (const auto& [hist, tgt] : batch) {
          Sample s;
          s.user_id = "py";
          s.history = hist;
          s.target_item = tgt.first.first;
          s.target_cat = tgt.first.second;
          s.label = tgt.second;
          samples.push_back(std::move(s));
        }
        GradCheckReport rep = mimn_gradcheck(p, samples, step, threads);
        return py::make_tuple(rep.max_rel_err, rep.worst_param, rep.params_checked);
      },
      py::arg("params"), py::arg("batch"), py::arg("step") = 1e-6, py::arg("threads") = 1,
      "Finite-difference verification; batch entries are (history, ((item, cat), label))");

  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"),
        py::arg("vocab"), py::arg("param_version") = 1);
  m.def("load_checkpoint", [](const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    MIMN_CHECK(!ck.baseline, "baseline checkpoints are not exposed to python");
    return py::make_tuple(*ck.model, ck.vocab, ck.param_version);
  });
}
