#include <pybind11/pybind11.h>

namespace py = pybind11;

PYBIND11_MODULE(_hedgebench, m) {
  m.doc() = "hedgebench core bindings";
}
