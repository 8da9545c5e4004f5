#include <pybind11/pybind11.h>

namespace py = pybind11;

void bind_model(py::module_& m);
void bind_data(py::module_& m);
void bind_serving(py::module_& m);

PYBIND11_MODULE(_mimn, m) {
  m.doc() = "Memory-based user-interest model with incremental serving";
  bind_model(m);
  bind_data(m);
  bind_serving(m);
}
