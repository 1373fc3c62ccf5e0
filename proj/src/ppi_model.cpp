#include "citeflux/ppi_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "citeflux/errors.hpp"

namespace citeflux {

double PaperParams::background() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < beta.size(); ++k) acc += beta[k] * s[k];
  return acc;
}

void PaperParams::validate() const {
  if (beta.size() != s.size())
    throw InvalidInput("params: beta and s length mismatch");
  if (beta.empty()) throw InvalidInput("params: at least one background feature");
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (double b : beta)
    if (!finite_nonneg(b)) throw InvalidInput("params: beta must be finite and >= 0");
  for (double v : s)
    if (!finite_nonneg(v)) throw InvalidInput("params: s must be finite and >= 0");
  if (!finite_nonneg(alpha)) throw InvalidInput("params: alpha must be finite and >= 0");
  if (!(std::isfinite(w1) && w1 > 0.0)) throw InvalidInput("params: w1 must be positive");
  if (!(std::isfinite(w2) && w2 > 0.0)) throw InvalidInput("params: w2 must be positive");
}

MarkedEventSequence MarkedEventSequence::canonical(std::vector<double> times,
                                                  std::vector<double> marks,
                                                  double observation_end) {
  if (times.size() != marks.size())
    throw InvalidInput("events: times and marks length mismatch");
  if (!(std::isfinite(observation_end) && observation_end >= 0.0))
    throw InvalidInput("events: invalid observation end");
  for (double t : times)
    if (!(std::isfinite(t) && t >= 0.0 && t <= observation_end))
      throw InvalidInput("events: time outside [0, observation_end]");
  for (double m : marks)
    if (!(std::isfinite(m) && m > 0.0 && m <= 2.0))
      throw InvalidInput("events: mark outside (0, 2]");

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  MarkedEventSequence ev;
  ev.observation_end = observation_end;
  ev.times.reserve(times.size());
  ev.marks.reserve(times.size());
  for (const auto i : order) {
    ev.times.push_back(times[i]);
    ev.marks.push_back(marks[i]);
  }
  // Ties get a strict order: member r of a tied run is nudged by r * 1e-9.
  const std::vector<double> orig = ev.times;
  for (std::size_t i = 1; i < ev.times.size(); ++i) {
    if (orig[i] == orig[i - 1])
      ev.times[i] = ev.times[i - 1] + 1e-9;
    else if (ev.times[i] <= ev.times[i - 1])  // nudges ran into a near neighbor
      ev.times[i] = std::nextafter(ev.times[i - 1], ev.times[i - 1] + 1.0);
  }
  if (!ev.times.empty())
    ev.observation_end = std::max(ev.observation_end, ev.times.back());
  return ev;
}

MarkedEventSequence MarkedEventSequence::with_unit_marks() const {
  MarkedEventSequence ev = *this;
  std::fill(ev.marks.begin(), ev.marks.end(), 1.0);
  return ev;
}

double intensity(const PaperParams& p, const MarkedEventSequence& events, double t) {
  if (t < 0.0) throw InvalidInput("intensity: negative time");
  double lam = p.background() * std::exp(-p.w1 * t);
  for (std::size_t j = 0; j < events.size() && events.times[j] < t; ++j)
    lam += p.alpha * events.marks[j] * std::exp(-p.w2 * (t - events.times[j]));
  return lam;
}

double compensator(const PaperParams& p, const MarkedEventSequence& events, double t0,
                   double t1) {
  if (t0 < 0.0 || t1 < t0) throw InvalidInput("compensator: need 0 <= t0 <= t1");
  // expm1 keeps e^{-w a} - e^{-w b} accurate when w (b - a) is tiny.
  const auto decay_mass = [](double w, double a, double b) {
    return -std::exp(-w * a) * std::expm1(-w * (b - a)) / w;
  };
  double acc = p.background() * decay_mass(p.w1, t0, t1);
  for (std::size_t j = 0; j < events.size() && events.times[j] < t1; ++j) {
    const double tj = events.times[j];
    const double lo = std::max(0.0, t0 - tj);
    acc += p.alpha * events.marks[j] * decay_mass(p.w2, lo, t1 - tj);
  }
  return acc;
}

double log_likelihood(const PaperParams& p, const MarkedEventSequence& events) {
  double acc = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double lam = intensity(p, events, events.times[i]);
    if (!(lam > 0.0))
      throw NumericError("log_likelihood: intensity vanishes at event " +
                         std::to_string(i));
    acc += std::log(lam);
  }
  return acc - compensator(p, events, 0.0, events.observation_end);
}

namespace {

// (e^{-a d} - e^{-b d}) / (b - a), continuous at b == a. The expm1 form
// avoids cancellation when the rates are close.
double exp_diff_quotient(double a, double b, double d) {
  const double h = b - a;
  if (h == 0.0) return d * std::exp(-a * d);
  return -std::exp(-a * d) * std::expm1(-h * d) / h;
}

}  // namespace

double predict_citations(const PaperParams& p, const MarkedEventSequence& history,
                         double horizon, const PredictOptions& options) {
  const double t0 = history.observation_end;
  if (!(horizon > t0))
    throw InvalidInput("predict_citations: horizon must exceed the history end");
  const double n0 = static_cast<double>(history.size());
  const double frozen = compensator(p, history, t0, horizon);
  if (options.mode == PredictionMode::frozen) return n0 + frozen;

  const double excite = p.alpha * options.mark_mean;
  const double kappa = p.w2 - excite;
  if (!(kappa > 0.0))
    throw NumericError("predict_citations: propagated mode needs w2 > alpha * mark_mean");
  if (excite == 0.0) return n0 + frozen;

  // J = integral over [t0, T] of the frozen intensity times e^{-kappa (T-u)}.
  const double span = horizon - t0;
  double j_mass =
      p.background() * std::exp(-p.w1 * t0) * exp_diff_quotient(p.w1, kappa, span);
  for (std::size_t j = 0; j < history.size() && history.times[j] < horizon; ++j) {
    const double back = t0 - history.times[j];  // >= 0, history ends at t0
    j_mass += p.alpha * history.marks[j] * std::exp(-p.w2 * back) *
              exp_diff_quotient(p.w2, kappa, span);
  }
  return n0 + frozen + excite / kappa * (frozen - j_mass);
}

MarkSampler MarkSampler::uniform_marks() {
  MarkSampler ms;
  ms.draw = [](Rng& g) { return 2.0 - uniform01(g); };  // (1, 2]
  ms.mean = 1.5;
  return ms;
}

MarkSampler MarkSampler::unit_marks() {
  MarkSampler ms;
  ms.draw = [](Rng&) { return 1.0; };
  ms.mean = 1.0;
  return ms;
}

MarkedEventSequence simulate(const PaperParams& p, double horizon,
                             const MarkSampler& mark_sampler, std::uint64_t seed) {
  p.validate();
  if (!(std::isfinite(horizon) && horizon >= 0.0))
    throw InvalidInput("simulate: invalid horizon");
  if (!(mark_sampler.mean > 0.0) || !mark_sampler.draw)
    throw InvalidInput("simulate: invalid mark sampler");
  if (p.alpha * mark_sampler.mean / p.w2 >= 1.0)
    throw NumericError("simulate: supercritical parameters (alpha * mean mark >= w2)");

  MarkedEventSequence ev;
  ev.observation_end = horizon;
  Rng g(seed);
  double s = 0.0;
  // Right limit of the intensity at s; the bound for the next candidate.
  auto right_limit = [&](double at) {
    double lam = p.background() * std::exp(-p.w1 * at);
    for (std::size_t j = 0; j < ev.size(); ++j)
      lam += p.alpha * ev.marks[j] * std::exp(-p.w2 * (at - ev.times[j]));
    return lam;
  };
  while (true) {
    const double bound = right_limit(s);
    if (!(bound > 1e-300)) break;
    s += exponential(g, bound);
    if (s > horizon) break;
    const double lam = intensity(p, ev, s);
    if (uniform01(g) * bound < lam) {
      ev.times.push_back(s);
      ev.marks.push_back(mark_sampler.draw(g));
    }
  }
  return ev;
}

std::vector<double> time_rescale(const PaperParams& p, const MarkedEventSequence& events) {
  std::vector<double> xi;
  xi.reserve(events.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    xi.push_back(compensator(p, events, prev, events.times[i]));
    prev = events.times[i];
  }
  return xi;
}

}  // namespace citeflux
