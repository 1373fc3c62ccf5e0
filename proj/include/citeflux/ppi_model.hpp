#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "citeflux/prng.hpp"

namespace citeflux {

// Per-paper view of the model parameters. `beta` is shared across papers
// (one weight per background feature), the rest is the paper's own.
struct PaperParams {
  std::vector<double> beta;  // >= 0, length K
  std::vector<double> s;     // background features, >= 0, length K
  double alpha = 0.0;        // self-excitation weight, >= 0
  double w1 = 1.0;           // background decay rate, > 0 (1/years)
  double w2 = 1.0;           // excitation decay rate, > 0 (1/years)

  double background() const;  // beta . s
  // Throws InvalidInput on size mismatch, negatives, or non-finite values.
  void validate() const;
};

struct MarkedEventSequence {
  std::vector<double> times;  // ascending, within [0, observation_end]
  std::vector<double> marks;  // same length, in (0, 2]
  double observation_end = 0.0;

  std::size_t size() const { return times.size(); }

  // Sorts by time, carries marks along, and separates exact ties by adding
  // 1e-9 years per position within a tied run so later model evaluations see
  // a deterministic strict order. Validates the invariants.
  static MarkedEventSequence canonical(std::vector<double> times, std::vector<double> marks,
                                       double observation_end);

  // Same times with every mark set to 1 (the variant that ignores citer impact).
  MarkedEventSequence with_unit_marks() const;
};

// Conditional intensity at t: background() e^{-w1 t} plus
// alpha sum over events strictly before t of D_j e^{-w2 (t - t_j)}.
double intensity(const PaperParams& p, const MarkedEventSequence& events, double t);

// Closed-form integral of the intensity over [t0, t1], using events with
// t_j < t1. Throws InvalidInput unless 0 <= t0 <= t1.
double compensator(const PaperParams& p, const MarkedEventSequence& events, double t0,
                   double t1);

// Sum of ln intensity at the event times minus the compensator over
// [0, observation_end]. Throws NumericError when the intensity vanishes at
// an event time.
double log_likelihood(const PaperParams& p, const MarkedEventSequence& events);

enum class PredictionMode { frozen, propagated };

struct PredictOptions {
  PredictionMode mode = PredictionMode::frozen;
  // Mean mark of future events, used only by propagated mode. 1.5 is the
  // mean of the default Uniform(1, 2] mark distribution.
  double mark_mean = 1.5;
};

// Expected cumulative citations at horizon T given the history up to its
// observation_end T0. Frozen mode integrates the intensity with the event
// set fixed at T0; propagated mode additionally lets expected future events
// excite the process (branching expectation with mean mark mark_mean,
// requires w2 > alpha * mark_mean). Throws InvalidInput when T <= T0.
double predict_citations(const PaperParams& p, const MarkedEventSequence& history,
                         double horizon, const PredictOptions& options = {});

struct MarkSampler {
  std::function<double(Rng&)> draw;
  double mean = 1.0;

  static MarkSampler uniform_marks();  // Uniform(1, 2], mean 1.5
  static MarkSampler unit_marks();     // constant 1
};

// Exact draw of the process on [0, T] by thinning; the dominating rate on
// each step is the right limit of the intensity, valid because the intensity
// only decays between events. Requires alpha * mark mean / w2 < 1.
MarkedEventSequence simulate(const PaperParams& p, double horizon,
                             const MarkSampler& mark_sampler, std::uint64_t seed);

// Inter-event compensator masses xi_i = compensator(t_{i-1}, t_i); i.i.d.
// Exp(1) under the true model.
std::vector<double> time_rescale(const PaperParams& p, const MarkedEventSequence& events);

}  // namespace citeflux
