#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mimn/bench.hpp"

namespace py = pybind11;
using namespace mimn;

void bind_serving(py::module_& m) {
  py::class_<uic::SnapshotInfo>(m, "SnapshotInfo")
      .def_readonly("id", &uic::SnapshotInfo::id)
      .def_readonly("path", &uic::SnapshotInfo::path)
      .def_readonly("param_version", &uic::SnapshotInfo::param_version)
      .def_readonly("checksum", &uic::SnapshotInfo::checksum)
      .def_readonly("user_count", &uic::SnapshotInfo::user_count);

  py::class_<uic::StateStore>(m, "StateStore")
      .def(py::init([](const ModelParams& params, const Vocabulary& vocab,
                       std::int64_t version, const std::string& snapshot_dir, int retention) {
             uic::VersionedModel model{std::make_shared<ModelParams>(params),
                                       std::make_shared<Vocabulary>(vocab), version};
             return std::make_unique<uic::StateStore>(std::move(model), snapshot_dir,
                                                      retention);
           }),
           py::arg("params"), py::arg("vocab"), py::arg("version") = 1,
           py::arg("snapshot_dir") = "", py::arg("retention") = 7)
      .def("apply_event", &uic::StateStore::apply_event,
           py::call_guard<py::gil_scoped_release>())
      .def("get_state", &uic::StateStore::get_state)
      .def("has_user", &uic::StateStore::has_user)
      .def_property_readonly("user_count", &uic::StateStore::user_count)
      .def("warm_up", &uic::StateStore::warm_up, py::call_guard<py::gil_scoped_release>())
      .def("snapshot", &uic::StateStore::snapshot)
      .def("rollback", &uic::StateStore::rollback)
      .def("rollback_file", &uic::StateStore::rollback_file)
      .def("deploy_params",
           [](uic::StateStore& store, const ModelParams& params, const Vocabulary& vocab,
              std::int64_t version) {
             store.deploy_params({std::make_shared<ModelParams>(params),
                                  std::make_shared<Vocabulary>(vocab), version});
           })
      .def_property_readonly("quarantined", &uic::StateStore::quarantined_count);

  m.def(
      "handle_request",
      [](const std::string& user,
         const std::vector<std::pair<std::string, std::string>>& candidates,
         const uic::StateStore& store, const ModelParams& params, const Vocabulary& vocab) {
        bench::ScoreRequest req;
        req.user_id = user;
        req.candidates = candidates;
        return bench::handle_request(req, store, params, vocab);
      },
      py::arg("user_id"), py::arg("candidates"), py::arg("store"), py::arg("params"),
      py::arg("vocab"), "Scores candidates from the stored fixed-size state only");

  m.def(
      "handle_request_recompute",
      [](const std::string& user,
         const std::vector<std::pair<std::string, std::string>>& candidates,
         const std::vector<BehaviorEvent>& history, const ModelParams& params,
         const Vocabulary& vocab) {
        bench::ScoreRequest req;
        req.user_id = user;
        req.candidates = candidates;
        return bench::handle_request_recompute(req, history, params, vocab);
      },
      py::arg("user_id"), py::arg("candidates"), py::arg("history"), py::arg("params"),
      py::arg("vocab"), "Reference path: reprocesses the whole history per request");
}
