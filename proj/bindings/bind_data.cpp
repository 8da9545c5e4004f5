#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mimn/auc.hpp"
#include "mimn/synthetic.hpp"
#include "mimn/trainer.hpp"

namespace py = pybind11;
using namespace mimn;

void bind_data(py::module_& m) {
  py::class_<BehaviorEvent>(m, "BehaviorEvent")
      .def(py::init([](std::string user, std::string item, std::string cat,
                       std::int64_t ts) {
             return BehaviorEvent{std::move(user), std::move(item), std::move(cat), ts};
           }),
           py::arg("user_id"), py::arg("item_id"), py::arg("category_id"),
           py::arg("timestamp"))
      .def_readwrite("user_id", &BehaviorEvent::user_id)
      .def_readwrite("item_id", &BehaviorEvent::item_id)
      .def_readwrite("category_id", &BehaviorEvent::category_id)
      .def_readwrite("timestamp", &BehaviorEvent::timestamp);

  py::class_<Sample>(m, "Sample")
      .def_readwrite("user_id", &Sample::user_id)
      .def_readwrite("history", &Sample::history)
      .def_readwrite("target_item", &Sample::target_item)
      .def_readwrite("target_cat", &Sample::target_cat)
      .def_readwrite("label", &Sample::label);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<>())
      .def("add_category", &Vocabulary::add_category)
      .def("add_item", &Vocabulary::add_item)
      .def("item_index", &Vocabulary::item_index)
      .def("category_index", &Vocabulary::category_index)
      .def("item_category", &Vocabulary::item_category)
      .def("item_id", &Vocabulary::item_id)
      .def("category_id", &Vocabulary::category_id)
      .def_property_readonly("item_count", &Vocabulary::item_count)
      .def_property_readonly("category_count", &Vocabulary::category_count)
      .def("__eq__", [](const Vocabulary& a, const Vocabulary& b) { return a == b; });

  m.def(
      "ingest",
      [](const std::string& path, const std::string& format, int min_len, int max_len,
         const std::string& meta) {
        IngestOptions opts;
        opts.format = format == "amazon" ? LogFormat::kAmazon : LogFormat::kTaobao;
        opts.min_len = min_len;
        opts.max_len = max_len;
        opts.meta_path = meta;
        Dataset ds = ingest(path, opts);
        return py::make_tuple(ds.samples, ds.vocab);
      },
      py::arg("path"), py::arg("format") = "taobao", py::arg("min_len") = 20,
      py::arg("max_len") = 100, py::arg("meta") = "");

  m.def("negative_sample", &negative_sample, py::arg("positives"), py::arg("vocab"),
        py::arg("seed"));
  m.def(
      "split",
      [](const std::vector<Sample>& samples, double test_fraction, std::uint64_t seed) {
        auto [a, b] = split(samples, SplitPolicy{test_fraction, seed});
        return py::make_tuple(a, b);
      },
      py::arg("samples"), py::arg("test_fraction") = 0.2, py::arg("seed") = 0);
  m.def("save_samples", &save_samples);
  m.def("load_samples", [](const std::string& path) {
    auto [samples, vocab] = load_samples(path);
    return py::make_tuple(samples, vocab);
  });

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return auc(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "train",
      [](const std::vector<Sample>& train_set, const std::vector<Sample>& test_set,
         const Vocabulary& vocab, const HyperParams& hyper, int epochs, int batch_size,
         double lr0, std::uint64_t seed) {
        TrainConfig cfg;
        cfg.hyper = hyper;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.lr0 = lr0;
        cfg.seed = seed;
        TrainResult r = train(cfg, train_set, test_set, vocab);
        return py::make_tuple(std::move(r.params), r.report.auc);
      },
      py::arg("train_set"), py::arg("test_set"), py::arg("vocab"), py::arg("hyper"),
      py::arg("epochs") = 1, py::arg("batch_size") = 128, py::arg("lr0") = 0.001,
      py::arg("seed") = 1,
      "Mini-batch training; returns (params, auc on the test set)");

  m.def(
      "drift_events",
      [](int n_users, int min_events, int max_events, std::uint64_t seed) {
        synth::DriftConfig cfg;
        cfg.n_users = n_users;
        cfg.min_events = min_events;
        cfg.max_events = max_events;
        cfg.seed = seed;
        return synth::drift_events(cfg);
      },
      py::arg("n_users") = 100, py::arg("min_events") = 21, py::arg("max_events") = 60,
      py::arg("seed") = 7, "Synthetic interest-drift behavior stream");
}
