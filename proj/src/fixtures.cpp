#include "switchguard/fixtures.hpp"

#include <stdexcept>

namespace switchguard::fixtures {

namespace {

Matrix rows3x2(std::initializer_list<double> v) {
  Matrix m(3, 2);
  auto it = v.begin();
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 2; ++j) m(i, j) = *it++;
  }
  return m;
}

}  // namespace

ChannelPlant example_plant() {
  Matrix a(3, 3);
  a << 1, 0, 1,
      -1, 1, 1,
      -1, 0, 2;
  Matrix c1(1, 3), c2(1, 3), d1(1, 2), d2(1, 2);
  c1 << 0, 1, 0;
  c2 << 1, -1, -2;
  d1 << 2, 0;
  d2 << 0, 0.01;
  // The state equation carries no disturbance; w enters the measurements only.
  return ChannelPlant(std::move(a), Matrix::Zero(3, 2), {{c1, d1}, {c2, d2}}, 1.0);
}

std::vector<SelectionMask> example_patterns() { return {SelectionMask{{0, 1}}, SelectionMask{{0}}}; }

Vector example_initial_state() { return (Vector(3) << 0.1, 0.2, -0.1).finished(); }

std::vector<Matrix> published_nominal_taps() {
  return {rows3x2({0, 0.75, 0.74, -0.065, -0.126, -0.031}), rows3x2({-1.25, -2, 0.195, 0, -0.906, -1})};
}

std::vector<Matrix> published_switching_taps(int family) {
  if (family == 1) {
    return {rows3x2({0.24, 0.44, 0.37, -0.17, 0.06, -0.17}), rows3x2({0.25, 0, 0.39, 0, 0.94, 0}),
            rows3x2({0.02, 0, 0.14, 0, 0.07, 0}), rows3x2({-0.21, 0, 0.01, 0, -0.3, 0}),
            rows3x2({-2.1, 0, -0.06, 0, -0.93, 0})};
  }
  if (family == 2) {
    return {rows3x2({-1.5, 0, 0.98, 0, 0.66, 0}), rows3x2({3.75, 0, 0.07, 0, 0.61, 0}),
            rows3x2({0, 0, -0.06, 0, -0.05, 0}), rows3x2({0, 0, -0.03, 0, -0.45, 0}),
            rows3x2({-2.25, 0, 0.05, 0, -0.77, 0})};
  }
  throw std::out_of_range("published_switching_taps: family must be 1 or 2");
}

}  // namespace switchguard::fixtures
