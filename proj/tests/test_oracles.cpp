#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "citeflux/prng.hpp"
#include "oracles.hpp"

using namespace citeflux;
using namespace citeflux::testing;

TEST_CASE("adaptive simpson nails smooth integrals") {
  CHECK(adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(adaptive_simpson([](double x) { return std::exp(-x); }, 0.0, 5.0) ==
        doctest::Approx(1.0 - std::exp(-5.0)).epsilon(1e-12));
  CHECK(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, M_PI) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(adaptive_simpson([](double) { return 2.0; }, 3.0, 3.0) == 0.0);
}

TEST_CASE("finite differences recover a known gradient") {
  const auto f = [](std::span<const double> x) {
    return x[0] * x[0] * 3.0 + std::sin(x[1]) + x[0] * x[1];
  };
  const auto g = fd_gradient(f, {1.5, 0.7});
  CHECK(g[0] == doctest::Approx(6.0 * 1.5 + 0.7).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(std::cos(0.7) + 1.5).epsilon(1e-8));
}

TEST_CASE("ks test accepts exponential samples and rejects shifted ones") {
  int accept = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng g(derive_seed(901, seed));
    std::vector<double> xs;
    for (int i = 0; i < 400; ++i) xs.push_back(exponential(g, 1.0));
    if (ks_exp1_pvalue(xs) > 0.01) ++accept;
  }
  CHECK(accept >= 48);

  Rng g(17);
  std::vector<double> wrong;
  for (int i = 0; i < 400; ++i) wrong.push_back(exponential(g, 2.0));
  CHECK(ks_exp1_pvalue(wrong) < 1e-6);

  std::vector<double> uniform;
  for (int i = 0; i < 400; ++i) uniform.push_back(uniform01(g));
  CHECK(ks_exp1_pvalue(uniform) < 1e-6);
}

TEST_CASE("nelder-mead minimizes standard surfaces") {
  const auto quad = [](std::span<const double> x) {
    return (x[0] - 3.0) * (x[0] - 3.0) + (x[1] + 1.0) * (x[1] + 1.0);
  };
  const auto r1 = nelder_mead(quad, {0.0, 0.0});
  CHECK(r1.x[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r1.x[1] == doctest::Approx(-1.0).epsilon(1e-6));

  const auto rosenbrock = [](std::span<const double> x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  const auto r2 = nelder_mead(rosenbrock, {-1.2, 1.0}, 0.5, 50000);
  CHECK(r2.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r2.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}
