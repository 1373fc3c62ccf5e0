#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "citeflux/errors.hpp"
#include "citeflux/ppi_model.hpp"
#include "citeflux/prng.hpp"
#include "oracles.hpp"

using namespace citeflux;
using citeflux::testing::quadrature_compensator;

namespace {

PaperParams make_params(double beta, double s, double alpha, double w1, double w2) {
  PaperParams p;
  p.beta = {beta};
  p.s = {s};
  p.alpha = alpha;
  p.w1 = w1;
  p.w2 = w2;
  return p;
}

MarkedEventSequence events_of(std::vector<double> times, std::vector<double> marks,
                              double horizon) {
  return MarkedEventSequence::canonical(std::move(times), std::move(marks), horizon);
}

// Random well-posed instance for property sweeps.
struct Instance {
  PaperParams p;
  MarkedEventSequence ev;
};

Instance random_instance(Rng& g, bool with_events = true) {
  Instance inst;
  inst.p = make_params(0.3 + 2.0 * uniform01(g), 0.5 + 3.0 * uniform01(g),
                       0.05 + 0.3 * uniform01(g), 0.2 + 2.0 * uniform01(g),
                       0.5 + 2.5 * uniform01(g));
  const double horizon = 5.0 + 15.0 * uniform01(g);
  std::vector<double> times, marks;
  if (with_events) {
    const auto n = 3 + uniform_index(g, 30);
    for (std::size_t i = 0; i < n; ++i) {
      times.push_back(horizon * uniform01(g));
      marks.push_back(2.0 - uniform01(g));
    }
  }
  inst.ev = events_of(std::move(times), std::move(marks), horizon);
  return inst;
}

}  // namespace

TEST_CASE("intensity") {
  SUBCASE("background only at the origin") {
    const auto p = make_params(2.0, 1.0, 0.0, 1.0, 1.0);
    const MarkedEventSequence none{{}, {}, 10.0};
    CHECK(intensity(p, none, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
  }

  SUBCASE("hand-evaluated mixed case") {
    const auto p = make_params(2.0, 1.0, 0.5, 1.0, 1.0);
    const auto ev = events_of({1.0}, {2.0}, 10.0);
    CHECK(intensity(p, ev, 2.0) ==
          doctest::Approx(2.0 * std::exp(-2.0) + std::exp(-1.0)).epsilon(1e-12));
  }

  SUBCASE("event at the evaluation time is excluded") {
    const auto p = make_params(2.0, 1.0, 0.5, 1.0, 1.0);
    const auto ev = events_of({1.0}, {2.0}, 10.0);
    CHECK(intensity(p, ev, 1.0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  }

  SUBCASE("negative time raises") {
    const auto p = make_params(1.0, 1.0, 0.0, 1.0, 1.0);
    const MarkedEventSequence none{{}, {}, 10.0};
    CHECK_THROWS_AS(intensity(p, none, -0.1), InvalidInput);
  }

  SUBCASE("non-negative everywhere and decaying between events") {
    Rng g(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = random_instance(g);
      for (int k = 0; k < 50; ++k) {
        const double t = inst.ev.observation_end * uniform01(g);
        CHECK(intensity(inst.p, inst.ev, t) >= 0.0);
      }
      // Pick a gap and check monotone decay inside it.
      for (std::size_t j = 0; j + 1 < inst.ev.size(); ++j) {
        const double a = inst.ev.times[j];
        const double b = inst.ev.times[j + 1];
        if (b - a < 1e-6) continue;
        const double t1 = a + 0.25 * (b - a);
        const double t2 = a + 0.75 * (b - a);
        CHECK(intensity(inst.p, inst.ev, t1) > intensity(inst.p, inst.ev, t2));
      }
    }
  }
}

TEST_CASE("compensator") {
  SUBCASE("degenerate interval is zero") {
    const auto p = make_params(2.0, 1.0, 0.5, 1.0, 1.0);
    const auto ev = events_of({1.0, 2.5}, {1.5, 1.2}, 10.0);
    CHECK(compensator(p, ev, 3.0, 3.0) == 0.0);
  }

  SUBCASE("background mass over a long window") {
    const auto p = make_params(2.0, 1.0, 0.0, 1.0, 1.0);
    const MarkedEventSequence none{{}, {}, 1e9};
    CHECK(compensator(p, none, 0.0, 1e6) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("invalid interval raises") {
    const auto p = make_params(2.0, 1.0, 0.0, 1.0, 1.0);
    const MarkedEventSequence none{{}, {}, 10.0};
    CHECK_THROWS_AS(compensator(p, none, 2.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(compensator(p, none, -1.0, 1.0), InvalidInput);
  }

  SUBCASE("matches adaptive quadrature on random instances") {
    Rng g(23);
    for (int trial = 0; trial < 30; ++trial) {
      const auto inst = random_instance(g);
      const double t1 = inst.ev.observation_end * (0.3 + 0.7 * uniform01(g));
      const double t0 = t1 * uniform01(g);
      const double closed = compensator(inst.p, inst.ev, t0, t1);
      const double quad = quadrature_compensator(inst.p, inst.ev, t0, t1);
      CHECK(closed == doctest::Approx(quad).epsilon(1e-8));
    }
  }

  SUBCASE("additive over adjacent intervals") {
    Rng g(29);
    for (int trial = 0; trial < 30; ++trial) {
      const auto inst = random_instance(g);
      const double T = inst.ev.observation_end;
      const double a = 0.2 * T * uniform01(g);
      const double c = T * (0.6 + 0.4 * uniform01(g));
      const double b = a + (c - a) * uniform01(g);
      const double split = compensator(inst.p, inst.ev, a, b) +
                           compensator(inst.p, inst.ev, b, c);
      const double whole = compensator(inst.p, inst.ev, a, c);
      CHECK(split == doctest::Approx(whole).epsilon(1e-12));
    }
  }
}

TEST_CASE("log likelihood") {
  SUBCASE("no events leaves only the compensator") {
    const auto p = make_params(2.0, 1.0, 0.5, 1.0, 1.0);
    const MarkedEventSequence none{{}, {}, 8.0};
    CHECK(log_likelihood(p, none) ==
          doctest::Approx(-compensator(p, none, 0.0, 8.0)).epsilon(1e-12));
  }

  SUBCASE("single background event in closed form") {
    const double bs = 2.0, w1 = 0.7, t1 = 1.3, T = 9.0;
    const auto p = make_params(2.0, 1.0, 0.0, w1, 1.0);
    const auto ev = events_of({t1}, {1.4}, T);
    const double expected =
        std::log(bs * std::exp(-w1 * t1)) - bs / w1 * (1.0 - std::exp(-w1 * T));
    CHECK(log_likelihood(p, ev) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("random instances match the quadrature route") {
    Rng g(31);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = random_instance(g);
      double lnsum = 0.0;
      for (std::size_t i = 0; i < inst.ev.size(); ++i)
        lnsum += std::log(intensity(inst.p, inst.ev, inst.ev.times[i]));
      const double expected =
          lnsum -
          quadrature_compensator(inst.p, inst.ev, 0.0, inst.ev.observation_end);
      CHECK(log_likelihood(inst.p, inst.ev) ==
            doctest::Approx(expected).epsilon(1e-8));
    }
  }

  SUBCASE("scaling beta by k and s by 1/k is an exact no-op") {
    Rng g(37);
    for (int trial = 0; trial < 10; ++trial) {
      auto inst = random_instance(g);
      const double base = log_likelihood(inst.p, inst.ev);
      inst.p.beta[0] *= 4.0;  // power of two keeps the product bit-exact
      inst.p.s[0] /= 4.0;
      CHECK(log_likelihood(inst.p, inst.ev) == base);
    }
  }

  SUBCASE("vanishing intensity at an event raises") {
    const auto p = make_params(0.0, 1.0, 0.5, 1.0, 1.0);
    const auto ev = events_of({1.0}, {1.5}, 5.0);  // first event has no excitation
    CHECK_THROWS_AS(log_likelihood(p, ev), NumericError);
  }
}

TEST_CASE("prediction") {
  SUBCASE("pure background closed form") {
    const auto p = make_params(2.0, 1.0, 0.0, 1.0, 1.0);
    MarkedEventSequence hist{{0.5, 1.0, 2.0, 3.0, 4.0},
                             {1.5, 1.5, 1.5, 1.5, 1.5},
                             5.0};
    const double expected = 5.0 + 2.0 * (std::exp(-5.0) - std::exp(-15.0));
    CHECK(predict_citations(p, hist, 15.0) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("continuity at a vanishing horizon") {
    const auto p = make_params(2.0, 1.0, 0.3, 1.0, 1.0);
    const auto hist = events_of({0.5, 1.5}, {1.2, 1.8}, 5.0);
    CHECK(predict_citations(p, hist, 5.0 + 1e-12) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK_THROWS_AS(predict_citations(p, hist, 5.0), InvalidInput);
    CHECK_THROWS_AS(predict_citations(p, hist, 4.0), InvalidInput);
  }

  SUBCASE("frozen mode equals quadrature of the frozen intensity") {
    Rng g(41);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = random_instance(g);
      const double t0 = inst.ev.observation_end;
      const double horizon = t0 + 1.0 + 10.0 * uniform01(g);
      const double expected = static_cast<double>(inst.ev.size()) +
                              quadrature_compensator(inst.p, inst.ev, t0, horizon);
      CHECK(predict_citations(inst.p, inst.ev, horizon) ==
            doctest::Approx(expected).epsilon(1e-8));
    }
  }

  SUBCASE("propagated mode adds non-negative mass") {
    Rng g(43);
    for (int trial = 0; trial < 20; ++trial) {
      const auto inst = random_instance(g);
      const double horizon = inst.ev.observation_end + 5.0;
      PredictOptions prop;
      prop.mode = PredictionMode::propagated;
      CHECK(predict_citations(inst.p, inst.ev, horizon, prop) >=
            predict_citations(inst.p, inst.ev, horizon) - 1e-12);
    }
  }

  SUBCASE("propagated mode handles the equal-rate corner") {
    // kappa = w2 - alpha * mark_mean made exactly equal to w1.
    auto p = make_params(1.5, 1.0, 0.4, 1.0, 1.0 + 0.4 * 1.5);
    const auto hist = events_of({0.5, 2.0}, {1.5, 1.5}, 4.0);
    PredictOptions prop;
    prop.mode = PredictionMode::propagated;
    const double v = predict_citations(p, hist, 12.0, prop);
    CHECK(std::isfinite(v));
    // Tiny detuning moves the answer only slightly.
    p.w2 += 1e-9;
    CHECK(predict_citations(p, hist, 12.0, prop) == doctest::Approx(v).epsilon(1e-6));
  }

  SUBCASE("propagated mode rejects critical parameters") {
    const auto p = make_params(1.0, 1.0, 1.0, 1.0, 1.2);  // alpha*1.5 > w2
    const auto hist = events_of({0.5}, {1.5}, 2.0);
    PredictOptions prop;
    prop.mode = PredictionMode::propagated;
    CHECK_THROWS_AS(predict_citations(p, hist, 5.0, prop), NumericError);
  }

  SUBCASE("propagated mode from scratch matches Monte Carlo") {
    // With an empty history and T0 = 0 the branching expectation covers the
    // whole process; simulation provides the independent estimate.
    const auto p = make_params(1.8, 1.0, 0.35, 0.8, 1.1);
    const MarkedEventSequence empty{{}, {}, 0.0};
    PredictOptions prop;
    prop.mode = PredictionMode::propagated;
    prop.mark_mean = 1.5;
    const double horizon = 12.0;
    const double expected = predict_citations(p, empty, horizon, prop);

    const auto sampler = MarkSampler::uniform_marks();
    const int runs = 4000;
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < runs; ++r) {
      const auto sim = simulate(p, horizon, sampler, derive_seed(777, r));
      const auto n = static_cast<double>(sim.size());
      sum += n;
      sumsq += n * n;
    }
    const double mean = sum / runs;
    const double se = std::sqrt((sumsq / runs - mean * mean) / runs);
    CHECK(std::abs(mean - expected) < 3.5 * se + 1e-9);
  }
}

TEST_CASE("simulation") {
  SUBCASE("no excitation reduces to an inhomogeneous Poisson count") {
    const auto p = make_params(2.5, 1.0, 0.0, 0.6, 1.0);
    const double T = 10.0;
    const double expected = 2.5 / 0.6 * (1.0 - std::exp(-0.6 * T));
    const auto sampler = MarkSampler::uniform_marks();
    const int runs = 3000;
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < runs; ++r) {
      const auto sim = simulate(p, T, sampler, derive_seed(555, r));
      const auto n = static_cast<double>(sim.size());
      sum += n;
      sumsq += n * n;
    }
    const double mean = sum / runs;
    const double se = std::sqrt((sumsq / runs - mean * mean) / runs);
    CHECK(std::abs(mean - expected) < 3.0 * se + 1e-9);
  }

  SUBCASE("zero background produces no events") {
    const auto p = make_params(0.0, 1.0, 0.5, 1.0, 1.0);
    const auto sim = simulate(p, 10.0, MarkSampler::uniform_marks(), 9);
    CHECK(sim.size() == 0);
  }

  SUBCASE("fixed seed reproduces bit-identical output") {
    const auto p = make_params(2.0, 1.0, 0.4, 0.8, 1.2);
    const auto a = simulate(p, 15.0, MarkSampler::uniform_marks(), 1234);
    const auto b = simulate(p, 15.0, MarkSampler::uniform_marks(), 1234);
    REQUIRE(a.size() == b.size());
    CHECK(a.times == b.times);
    CHECK(a.marks == b.marks);
    const auto c = simulate(p, 15.0, MarkSampler::uniform_marks(), 1235);
    CHECK(a.times != c.times);
  }

  SUBCASE("supercritical parameters are rejected") {
    const auto p = make_params(1.0, 1.0, 1.0, 1.0, 1.4);  // 1.0 * 1.5 / 1.4 > 1
    CHECK_THROWS_AS(simulate(p, 10.0, MarkSampler::uniform_marks(), 3), NumericError);
    CHECK_NOTHROW(simulate(p, 10.0, MarkSampler::unit_marks(), 3));  // 1/1.4 < 1
  }

  SUBCASE("marks come from the sampler's range") {
    const auto p = make_params(3.0, 1.0, 0.3, 0.5, 1.0);
    const auto sim = simulate(p, 20.0, MarkSampler::uniform_marks(), 77);
    REQUIRE(sim.size() > 0);
    for (const double m : sim.marks) {
      CHECK(m > 1.0);
      CHECK(m <= 2.0);
    }
    const auto unit = simulate(p, 20.0, MarkSampler::unit_marks(), 77);
    for (const double m : unit.marks) CHECK(m == 1.0);
  }

  SUBCASE("invalid inputs raise") {
    const auto p = make_params(1.0, 1.0, 0.1, 1.0, 1.0);
    CHECK_THROWS_AS(simulate(p, -1.0, MarkSampler::uniform_marks(), 1), InvalidInput);
    MarkSampler broken;
    CHECK_THROWS_AS(simulate(p, 1.0, broken, 1), InvalidInput);
  }
}

TEST_CASE("time rescaling") {
  SUBCASE("near-constant rate gives rate times spacing") {
    const auto p = make_params(3.0, 1.0, 0.0, 1e-12, 1.0);
    const auto ev = events_of({1.0, 2.0, 3.5}, {1.5, 1.5, 1.5}, 5.0);
    const auto xi = time_rescale(p, ev);
    REQUIRE(xi.size() == 3);
    CHECK(xi[0] == doctest::Approx(3.0 * 1.0).epsilon(1e-9));
    CHECK(xi[1] == doctest::Approx(3.0 * 1.0).epsilon(1e-9));
    CHECK(xi[2] == doctest::Approx(3.0 * 1.5).epsilon(1e-9));
  }

  SUBCASE("empty events give an empty list") {
    const auto p = make_params(1.0, 1.0, 0.2, 1.0, 1.0);
    CHECK(time_rescale(p, {{}, {}, 4.0}).empty());
  }

  SUBCASE("simulated data under the true model passes per-seed KS checks") {
    // One KS test per simulated sequence. Pooling intervals across windows
    // would bias the sample: the censored final interval of each window
    // removes about one unit of mass, which a large pooled sample detects.
    const auto p = make_params(8.0, 1.0, 0.4, 0.25, 1.3);
    int pass = 0;
    int total_events = 0;
    for (int r = 0; r < 50; ++r) {
      const auto sim = simulate(p, 30.0, MarkSampler::uniform_marks(), derive_seed(31, r));
      const auto xi = time_rescale(p, sim);
      total_events += static_cast<int>(xi.size());
      if (citeflux::testing::ks_exp1_pvalue(xi) > 0.01) ++pass;
    }
    CHECK(total_events > 2000);  // the checks have real power
    CHECK(pass >= 47);
  }
}

TEST_CASE("event sequence canonicalization") {
  SUBCASE("sorts and separates ties deterministically") {
    const auto ev = events_of({2.0, 1.0, 1.0, 1.0}, {1.1, 1.2, 1.3, 1.4}, 5.0);
    REQUIRE(ev.size() == 4);
    CHECK(ev.times[0] == 1.0);
    CHECK(ev.times[1] == doctest::Approx(1.0 + 1e-9));
    CHECK(ev.times[2] == doctest::Approx(1.0 + 2e-9));
    CHECK(ev.times[3] == 2.0);
    // Stable pairing: marks follow their original times.
    CHECK(ev.marks[0] == 1.2);
    CHECK(ev.marks[1] == 1.3);
    CHECK(ev.marks[2] == 1.4);
    CHECK(ev.marks[3] == 1.1);
    for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev.times[i] > ev.times[i - 1]);
  }

  SUBCASE("validation rejects bad inputs") {
    CHECK_THROWS_AS(events_of({1.0}, {1.5, 1.5}, 5.0), InvalidInput);
    CHECK_THROWS_AS(events_of({-0.5}, {1.5}, 5.0), InvalidInput);
    CHECK_THROWS_AS(events_of({6.0}, {1.5}, 5.0), InvalidInput);
    CHECK_THROWS_AS(events_of({1.0}, {0.0}, 5.0), InvalidInput);
    CHECK_THROWS_AS(events_of({1.0}, {2.5}, 5.0), InvalidInput);
    CHECK_THROWS_AS(events_of({1.0}, {1.5}, -1.0), InvalidInput);
  }

  SUBCASE("unit-mark variant zeroes out citer impact") {
    const auto ev = events_of({1.0, 2.0}, {1.9, 1.3}, 5.0);
    const auto unit = ev.with_unit_marks();
    CHECK(unit.times == ev.times);
    CHECK(unit.marks == std::vector<double>{1.0, 1.0});
    // Intensity with unit marks equals intensity with marks literally 1.
    const auto p = make_params(1.0, 1.0, 0.5, 1.0, 1.0);
    const auto literal = events_of({1.0, 2.0}, {1.0, 1.0}, 5.0);
    CHECK(intensity(p, unit, 3.0) == intensity(p, literal, 3.0));
  }
}

TEST_CASE("parameter validation") {
  auto p = make_params(1.0, 1.0, 0.1, 1.0, 1.0);
  CHECK_NOTHROW(p.validate());
  p.w1 = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = make_params(1.0, 1.0, -0.1, 1.0, 1.0);
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = make_params(1.0, 1.0, 0.1, 1.0, 1.0);
  p.s.push_back(2.0);
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p = make_params(std::numeric_limits<double>::infinity(), 1.0, 0.1, 1.0, 1.0);
  CHECK_THROWS_AS(p.validate(), InvalidInput);
}
