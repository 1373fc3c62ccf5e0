#include "citeflux/ppi_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "citeflux/errors.hpp"
#include "citeflux/indicators.hpp"
#include "citeflux/parallel.hpp"

namespace citeflux {

namespace {

// (1 - e^{-w s}) / w without cancellation for small w s.
double window_mass(double w, double s) { return -std::expm1(-w * s) / w; }

// d/dw of window_mass: (e^{-w s}(1 + w s) - 1) / w^2; series below the
// cancellation threshold.
double window_mass_dw(double w, double s) {
  const double x = w * s;
  if (std::abs(x) < 1e-4) return s * s * (-0.5 + x / 3.0 - x * x / 8.0);
  return (std::exp(-x) * (1.0 + x) - 1.0) / (w * w);
}

double negative_log_likelihood(const PaperParams& p, const MarkedEventSequence& events) {
  return -log_likelihood(p, events);
}

}  // namespace

double Responsibilities::background_mass(std::size_t k) const {
  double total = 0.0;
  for (const auto& row : bg) total += row[k];
  return total;
}

double Responsibilities::trigger_mass() const {
  double total = 0.0;
  for (const auto& row : trig)
    for (double v : row) total += v;
  return total;
}

Responsibilities em_responsibilities(const PaperParams& p,
                                     const MarkedEventSequence& events) {
  p.validate();
  const std::size_t n = events.size();
  const std::size_t K = p.beta.size();
  Responsibilities r;
  r.bg.assign(n, std::vector<double>(K, 0.0));
  r.trig.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = events.times[i];
    double total = 0.0;
    auto& bg = r.bg[i];
    for (std::size_t k = 0; k < K; ++k) {
      bg[k] = p.beta[k] * p.s[k] * std::exp(-p.w1 * ti);
      total += bg[k];
    }
    auto& trig = r.trig[i];
    trig.assign(i, 0.0);
    for (std::size_t j = 0; j < i; ++j) {
      if (!(events.times[j] < ti)) continue;
      trig[j] = p.alpha * events.marks[j] * std::exp(-p.w2 * (ti - events.times[j]));
      total += trig[j];
    }
    if (!(total > 0.0))
      throw NumericError("em_responsibilities: zero intensity at event " +
                         std::to_string(i));
    for (double& v : bg) v /= total;
    for (double& v : trig) v /= total;
  }
  return r;
}

EmMasses em_masses(const PaperParams& p, const MarkedEventSequence& events) {
  p.validate();
  const std::size_t n = events.size();
  const std::size_t K = p.beta.size();
  EmMasses m;
  m.background.assign(K, 0.0);
  const double bs = p.background();
  double excite = 0.0;      // sum over prior events of D_j e^{-w2 (t_i - t_j)}
  double recip_sum = 0.0;   // sum of e^{-w1 t_i} / lambda_i
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double gap = events.times[i] - events.times[i - 1];
      excite = (excite + events.marks[i - 1]) * std::exp(-p.w2 * gap);
    }
    const double decay = std::exp(-p.w1 * events.times[i]);
    const double lambda = bs * decay + p.alpha * excite;
    if (!(lambda > 0.0))
      throw NumericError("em_masses: zero intensity at event " + std::to_string(i));
    recip_sum += decay / lambda;
    m.trigger += p.alpha * excite / lambda;
  }
  for (std::size_t k = 0; k < K; ++k) m.background[k] = p.beta[k] * p.s[k] * recip_sum;
  return m;
}

double soft_threshold(double x, double k) {
  const double shrunk = std::abs(x) - k;
  if (shrunk <= 0.0) return 0.0;
  return x < 0.0 ? -shrunk : shrunk;
}

double update_beta(double B_k, double background_mass, double rho) {
  if (!(rho > 0.0)) throw InvalidInput("update_beta: rho must be positive");
  if (!(background_mass >= 0.0))
    throw InvalidInput("update_beta: share mass must be nonnegative");
  const double disc = std::sqrt(B_k * B_k + 4.0 * rho * background_mass);
  // Two algebraically equal forms; each avoids cancellation on its side.
  if (B_k > 0.0) {
    const double denom = B_k + disc;
    return denom > 0.0 ? 2.0 * background_mass / denom : 0.0;
  }
  return (disc - B_k) / (2.0 * rho);
}

double update_alpha(double trigger_mass, const MarkedEventSequence& events, double w2,
                    bool literal_denominator) {
  if (events.size() == 0) throw InvalidInput("update_alpha: no events");
  if (!(w2 > 0.0)) throw InvalidInput("update_alpha: w2 must be positive");
  if (!(trigger_mass >= 0.0))
    throw InvalidInput("update_alpha: share mass must be nonnegative");
  if (trigger_mass == 0.0) return 0.0;
  const double T = events.observation_end;
  double den = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double span = T - events.times[i];
    den += literal_denominator ? (events.marks[i] - std::exp(-w2 * span)) / w2
                               : events.marks[i] * window_mass(w2, span);
  }
  if (!(den > 0.0))
    throw NumericError("update_alpha: degenerate window, no mass after the events");
  return trigger_mass / den;
}

WGradient grad_w(const PaperParams& p, const MarkedEventSequence& events) {
  p.validate();
  const double bs = p.background();
  WGradient g;
  // excite: sum D_j e^{-w2 d_j}; excite_dw: sum D_j d_j e^{-w2 d_j}, d_j the lag.
  double excite = 0.0;
  double excite_dw = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0) {
      const double gap = events.times[i] - events.times[i - 1];
      const double decay = std::exp(-p.w2 * gap);
      excite_dw = decay * (excite_dw + gap * (excite + events.marks[i - 1]));
      excite = decay * (excite + events.marks[i - 1]);
    }
    const double bg = bs * std::exp(-p.w1 * events.times[i]);
    const double lambda = bg + p.alpha * excite;
    const double bg_term = events.times[i] * bg;
    const double trig_term = p.alpha * excite_dw;
    if (bg_term != 0.0) g.dw1 += bg_term / lambda;
    if (trig_term != 0.0) g.dw2 += trig_term / lambda;
  }
  const double T = events.observation_end;
  if (bs != 0.0) g.dw1 += bs * window_mass_dw(p.w1, T);
  if (p.alpha != 0.0) {
    double tail = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i)
      tail += events.marks[i] * window_mass_dw(p.w2, T - events.times[i]);
    g.dw2 += p.alpha * tail;
  }
  return g;
}

WStep gd_step_w(const PaperParams& p, const MarkedEventSequence& events,
                const FitConfig& config) {
  config.validate();
  const auto clip = [&](double w) { return std::clamp(w, config.w_min, config.w_max); };
  const double base = negative_log_likelihood(p, events);
  const WGradient g = grad_w(p, events);
  WStep out{p.w1, p.w2, false, 0};
  double step = config.gd_step;
  for (int attempt = 0; attempt <= config.gd_max_backtracks; ++attempt) {
    const double w1 = clip(p.w1 - step * g.dw1);
    const double w2 = clip(p.w2 - step * g.dw2);
    if (w1 == p.w1 && w2 == p.w2) {
      // Stationary, or the gradient pushes against the active bounds.
      out.accepted = true;
      out.backtracks = attempt;
      return out;
    }
    PaperParams trial = p;
    trial.w1 = w1;
    trial.w2 = w2;
    if (negative_log_likelihood(trial, events) <= base) {
      out = {w1, w2, true, attempt};
      return out;
    }
    step *= config.gd_backtrack;
  }
  out.backtracks = config.gd_max_backtracks + 1;
  return out;
}

void FitConfig::validate() const {
  const auto bad = [](const char* what) {
    throw InvalidInput(std::string("FitConfig: ") + what);
  };
  if (!(rho > 0.0) || !std::isfinite(rho)) bad("rho must be positive and finite");
  if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg))
    bad("lambda_reg must be nonnegative and finite");
  if (outer_max < 1) bad("outer_max must be at least 1");
  if (em_max < 1) bad("em_max must be at least 1");
  if (!(em_tol > 0.0)) bad("em_tol must be positive");
  if (!(gd_step > 0.0) || !std::isfinite(gd_step)) bad("gd_step must be positive");
  if (!(gd_backtrack > 0.0) || !(gd_backtrack < 1.0))
    bad("gd_backtrack must lie in (0, 1)");
  if (gd_max_backtracks < 0) bad("gd_max_backtracks must be nonnegative");
  if (!(w_min > 0.0) || !(w_max >= w_min) || !std::isfinite(w_max))
    bad("w bounds must satisfy 0 < w_min <= w_max");
  if (!(tol_objective > 0.0)) bad("tol_objective must be positive");
  if (!(tol_residual > 0.0)) bad("tol_residual must be positive");
  if (jobs < 1) bad("jobs must be at least 1");
}

PaperParams FitResult::params_for(std::size_t index) const {
  const FittedPaper& fp = papers.at(index);
  PaperParams p;
  p.beta = beta;
  p.s = fp.s;
  p.alpha = fp.alpha;
  p.w1 = fp.w1;
  p.w2 = fp.w2;
  return p;
}

FitResult fit(std::span<const FitPaper> papers, const FitConfig& config) {
  config.validate();
  if (papers.empty()) throw InvalidInput("fit: no training papers");
  const std::size_t N = papers.size();
  const std::size_t K = papers[0].s.size();
  if (K == 0) throw InvalidInput("fit: empty feature row");
  for (const FitPaper& fp : papers) {
    if (fp.s.size() != K)
      throw InvalidInput("fit: feature rows differ in length at paper " + fp.id);
    if (fp.events.size() == 0)
      throw InvalidInput("fit: paper " + fp.id + " has no events in the window");
    if (!(fp.events.observation_end > 0.0))
      throw InvalidInput("fit: paper " + fp.id + " has an empty window");
    double s_sum = 0.0;
    for (double v : fp.s) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidInput("fit: negative or non-finite feature at paper " + fp.id);
      s_sum += v;
    }
    if (!(s_sum > 0.0))
      throw InvalidInput("fit: paper " + fp.id + " has an all-zero feature row");
  }

  AdmmState admm;
  admm.beta.assign(K, 1.0);
  admm.z = admm.beta;
  admm.u.assign(K, 0.0);
  admm.rho = config.rho;
  admm.lambda_reg = config.lambda_reg;
  std::vector<double>& beta = admm.beta;
  std::vector<double>& z = admm.z;
  std::vector<double>& u = admm.u;
  std::vector<double> alpha(N, 0.0);
  std::vector<double> w1(N, std::clamp(1.0, config.w_min, config.w_max));
  std::vector<double> w2 = w1;
  for (std::size_t d = 0; d < N; ++d) {
    double mark_sum = 0.0;
    for (double mk : papers[d].events.marks) mark_sum += mk;
    alpha[d] = static_cast<double>(papers[d].events.size()) / mark_sum;
  }

  const auto params_of = [&](std::size_t d) {
    PaperParams p;
    p.beta = beta;
    p.s = papers[d].s;
    p.alpha = alpha[d];
    p.w1 = w1[d];
    p.w2 = w2[d];
    return p;
  };

  FitReport report;
  report.line_search_failures.assign(N, 0);

  std::vector<EmMasses> masses(N);
  std::vector<double> alpha_next(N);
  std::vector<WStep> steps(N);
  std::vector<double> paper_nll(N);

  double best_obj = std::numeric_limits<double>::infinity();
  double prev_obj = std::numeric_limits<double>::infinity();
  std::vector<double> best_beta, best_z, best_alpha, best_w1, best_w2;
  double last_residual = 0.0;

  int outer = 1;
  for (; outer <= config.outer_max; ++outer) {
    // Shared background window masses at the current decay rates.
    std::vector<double> shared_mass(K, 0.0);
    for (std::size_t d = 0; d < N; ++d) {
      const double m = window_mass(w1[d], papers[d].events.observation_end);
      for (std::size_t k = 0; k < K; ++k) shared_mass[k] += papers[d].s[k] * m;
    }

    // Inner EM on (beta, alpha); consensus variables stay fixed.
    for (int inner = 0; inner < config.em_max; ++inner) {
      parallel_for(N, config.jobs, [&](std::size_t d) {
        masses[d] = em_masses(params_of(d), papers[d].events);
        alpha_next[d] = update_alpha(masses[d].trigger, papers[d].events, w2[d],
                                     config.literal_alpha);
      });
      std::vector<double> total_mass(K, 0.0);
      for (std::size_t d = 0; d < N; ++d)  // ordered reduction
        for (std::size_t k = 0; k < K; ++k) total_mass[k] += masses[d].background[k];
      double delta = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double shift = shared_mass[k] + config.rho * (u[k] - z[k]);
        const double next = update_beta(shift, total_mass[k], config.rho);
        delta = std::max(delta, std::abs(next - beta[k]));
        beta[k] = next;
      }
      for (std::size_t d = 0; d < N; ++d) {
        delta = std::max(delta, std::abs(alpha_next[d] - alpha[d]));
        alpha[d] = alpha_next[d];
      }
      if (delta < config.em_tol) break;
    }

    // Consensus threshold and dual step.
    double residual = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      z[k] = soft_threshold(beta[k] + u[k], config.lambda_reg / config.rho);
      u[k] += beta[k] - z[k];
      residual = std::max(residual, std::abs(beta[k] - z[k]));
    }
    admm.iteration = outer;
    admm.primal_residual = residual;
    last_residual = residual;

    // Decay-rate epoch.
    parallel_for(N, config.jobs, [&](std::size_t d) {
      steps[d] = gd_step_w(params_of(d), papers[d].events, config);
    });
    for (std::size_t d = 0; d < N; ++d) {
      w1[d] = steps[d].w1;
      w2[d] = steps[d].w2;
      if (!steps[d].accepted) ++report.line_search_failures[d];
    }

    // Penalized objective at the current state.
    parallel_for(N, config.jobs, [&](std::size_t d) {
      paper_nll[d] = negative_log_likelihood(params_of(d), papers[d].events);
    });
    double obj = 0.0;
    for (std::size_t d = 0; d < N; ++d) obj += paper_nll[d];  // ordered reduction
    for (std::size_t k = 0; k < K; ++k) obj += config.lambda_reg * std::abs(beta[k]);
    if (!std::isfinite(obj)) throw NumericError("fit: non-finite objective");

    report.objective_trace.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best_beta = beta;
      best_z = z;
      best_alpha = alpha;
      best_w1 = w1;
      best_w2 = w2;
    }
    report.best_trace.push_back(best_obj);

    const bool settled =
        outer > 1 &&
        std::abs(obj - prev_obj) <= config.tol_objective * std::max(1.0, std::abs(obj));
    prev_obj = obj;
    if (settled && residual <= config.tol_residual) {
      report.converged = true;
      break;
    }
  }

  report.outer_iterations = std::min(outer, config.outer_max);
  report.final_primal_residual = last_residual;

  FitResult result;
  result.beta = std::move(best_z);
  result.report = std::move(report);
  result.papers.reserve(N);
  for (std::size_t d = 0; d < N; ++d)
    result.papers.push_back(
        {papers[d].id, best_alpha[d], best_w1[d], best_w2[d], papers[d].s});
  return result;
}

std::vector<FitPaper> build_fit_papers(const Corpus& corpus, const Cohort& cohort,
                                       const BuildFitOptions& options) {
  if (!corpus.disambiguated())
    throw InvalidInput("build_fit_papers: corpus must be disambiguated first");
  std::vector<FitPaper> out;
  out.reserve(cohort.training_papers.size());
  for (const std::string& id : cohort.training_papers) {
    const std::int32_t d = corpus.require(id);
    const PaperRecord& rec = corpus.paper(d);
    const double cutoff_abs = rec.pub_time + cohort.train_window;

    double s_max = 0.0;
    for (std::size_t pos = 0; pos < rec.authors.size(); ++pos) {
      const std::int32_t ident = corpus.identity_of(d, static_cast<std::int32_t>(pos));
      if (ident < 0) continue;
      s_max = std::max(s_max, q_value(corpus, ident, options.mu_p, cutoff_abs).q);
    }
    if (!(s_max > 0.0))
      throw InvalidInput("build_fit_papers: paper " + id + " has no scoreable author");

    CitationHistory hist = citation_history(corpus, d, cohort.train_window);
    std::vector<double> marks(hist.times.size(), 1.0);
    if (!options.unit_marks && !hist.times.empty()) {
      std::vector<double> citer_q(hist.times.size(), 0.0);
      double q_max = 0.0;
      for (std::size_t j = 0; j < hist.citing.size(); ++j) {
        const std::int32_t citing = hist.citing[j];
        const PaperRecord& crec = corpus.paper(citing);
        double best = 0.0;
        for (std::size_t pos = 0; pos < crec.authors.size(); ++pos) {
          const std::int32_t ident =
              corpus.identity_of(citing, static_cast<std::int32_t>(pos));
          if (ident < 0) continue;
          best = std::max(best, q_value(corpus, ident, options.mu_p, cutoff_abs).q);
        }
        citer_q[j] = best;
        q_max = std::max(q_max, best);
      }
      if (q_max > 0.0)
        for (std::size_t j = 0; j < marks.size(); ++j)
          marks[j] = citer_impact(citer_q[j], q_max);
    }

    FitPaper fp;
    fp.id = id;
    fp.events = MarkedEventSequence::canonical(std::move(hist.times), std::move(marks),
                                               cohort.train_window);
    fp.s = {s_max};
    out.push_back(std::move(fp));
  }
  return out;
}

}  // namespace citeflux
