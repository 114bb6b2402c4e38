#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <string>

#include "crowdsr/adam.hpp"

using namespace crowdsr;

namespace {

ModelParameters single(double value) {
  ModelParameters p;
  p.add("x", Partition::counting, Tensor({1, 1, 1, 1}, {value}));
  return p;
}

// Textbook scalar Adam, written independently of the library.
struct ScalarAdam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0, v = 0;
  int t = 0;
  double step(double x, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("zero gradient leaves parameters unchanged") {
  ModelParameters p = single(1.25);
  p.at("x").ensure_grad().setZero();
  AdamState s;
  adam_step(p, s, {});
  CHECK(p.at("x").item() == 1.25);
  CHECK(s.step == 1);
}

TEST_CASE("first step moves by lr against the gradient sign") {
  for (double g : {3.0, -0.02, 150.0}) {
    ModelParameters p = single(0.0);
    p.at("x").ensure_grad()[0] = g;
    AdamState s;
    AdamOptions o;
    o.lr = 1e-3;
    adam_step(p, s, o);
    CHECK(p.at("x").item() == doctest::Approx(-1e-3 * (g > 0 ? 1 : -1)).epsilon(1e-6));
  }
}

TEST_CASE("minimizes a quadratic like the scalar reference") {
  ModelParameters p = single(0.0);
  AdamState s;
  AdamOptions o;
  o.lr = 0.1;
  ScalarAdam ref{0.1};
  double xr = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = p.at("x").item();
    p.at("x").ensure_grad()[0] = 2.0 * (x - 3.0);
    adam_step(p, s, o);
    xr = ref.step(xr, 2.0 * (xr - 3.0));
    CHECK(p.at("x").item() == doctest::Approx(xr).epsilon(1e-12));
  }
  CHECK(std::abs(p.at("x").item() - 3.0) < 0.1);
}

TEST_CASE("missing gradient is reported by name") {
  ModelParameters p = single(0.0);
  p.add("head.conv1x1.weight", Partition::counting, Tensor({1, 1, 1, 1}, {0.0}));
  p.at("x").ensure_grad()[0] = 1.0;
  AdamState s;
  try {
    adam_step(p, s, {});
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("head.conv1x1.weight") != std::string::npos);
  }
}
