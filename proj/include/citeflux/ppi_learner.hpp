#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "citeflux/corpus.hpp"
#include "citeflux/ppi_model.hpp"

namespace citeflux {

// One training instance: the paper's events over the shared observation
// window plus its background feature row.
struct FitPaper {
  std::string id;
  MarkedEventSequence events;  // observation_end equals the train window
  std::vector<double> s;       // length K, non-negative, not all zero
};

struct BuildFitOptions {
  double mu_p = 0.0;
  bool unit_marks = false;  // drop citer impact from the marks
};

// Training instances for a cohort: event times relative to publication,
// marks from citer productivity scores at the train cutoff, one background
// feature per paper (its best author score at the same cutoff). Requires a
// disambiguated corpus. Throws InvalidInput for a paper whose feature would
// be zero; such a paper could never explain its first event.
std::vector<FitPaper> build_fit_papers(const Corpus& corpus, const Cohort& cohort,
                                       const BuildFitOptions& options = {});

struct FitConfig {
  double rho = 1.0;         // consensus penalty weight
  double lambda_reg = 0.1;  // L1 weight on the shared coefficients
  int outer_max = 200;
  int em_max = 50;
  double em_tol = 1e-10;  // max parameter change that closes the inner loop
  double gd_step = 0.5;   // initial decay-rate step
  double gd_backtrack = 0.5;
  int gd_max_backtracks = 40;
  double w_min = 1e-4;  // 1/years; w_min == w_max pins the decay rates
  double w_max = 10.0;
  double tol_objective = 1e-6;  // relative change of the penalized objective
  double tol_residual = 1e-6;   // infinity-norm consensus residual
  bool literal_alpha = false;   // see update_alpha
  std::uint64_t seed = 0;       // reserved; fitting is deterministic
  int jobs = 1;

  void validate() const;  // throws InvalidInput
};

// Consensus state for the L1-penalized shared coefficients.
struct AdmmState {
  std::vector<double> beta;
  std::vector<double> z;  // thresholded consensus iterate
  std::vector<double> u;  // scaled dual
  double rho = 1.0;
  double lambda_reg = 0.1;
  int iteration = 0;
  double primal_residual = 0.0;  // max_k |beta_k - z_k|
};

// Per-event latent shares for one paper. bg[i][k]: event i attributed to
// background feature k; trig[i][j]: event i attributed to prior event j.
// The shares of one event sum to 1.
struct Responsibilities {
  std::vector<std::vector<double>> bg;
  std::vector<std::vector<double>> trig;

  double background_mass(std::size_t k) const;  // sum over events of bg[i][k]
  double trigger_mass() const;                  // sum of all trig shares
};

// Throws NumericError when the intensity vanishes at an event.
Responsibilities em_responsibilities(const PaperParams& p,
                                     const MarkedEventSequence& events);

// The share totals the fit consumes: equal to the sums over
// em_responsibilities without materializing the matrices.
struct EmMasses {
  std::vector<double> background;  // per feature
  double trigger = 0.0;
};
EmMasses em_masses(const PaperParams& p, const MarkedEventSequence& events);

double soft_threshold(double x, double k);  // sign(x) * max(|x| - k, 0)

// Nonnegative root of rho b^2 + B b - background_mass = 0: the minimizer of
// the per-coefficient complete-data objective. B carries the background
// window mass plus the consensus shift rho (u_k - z_k).
double update_beta(double B_k, double background_mass, double rho);

// Triggering coefficient that closes the complete-data objective:
// trigger_mass / sum_i D_i (1 - e^{-w2 (T - t_i)}) / w2. literal_denominator
// switches to the variant sum_i (D_i - e^{-w2 (T - t_i)}) / w2, kept only
// for comparison runs; the default form is the stationarity-correct one.
double update_alpha(double trigger_mass, const MarkedEventSequence& events, double w2,
                    bool literal_denominator = false);

struct WGradient {
  double dw1 = 0.0;
  double dw2 = 0.0;
};

// Analytic gradient of the per-paper negative log-likelihood in the decay
// rates. Exactly zero in dw1 when the background vanishes, and in dw2 when
// alpha is zero.
WGradient grad_w(const PaperParams& p, const MarkedEventSequence& events);

struct WStep {
  double w1 = 0.0;
  double w2 = 0.0;
  bool accepted = false;
  int backtracks = 0;
};

// One projected descent step on (w1, w2) with a backtracking line search,
// clipped to the configured bounds. Never increases the negative
// log-likelihood; when the line search fails the old rates are kept and
// accepted is false.
WStep gd_step_w(const PaperParams& p, const MarkedEventSequence& events,
                const FitConfig& config);

struct FittedPaper {
  std::string id;
  double alpha = 0.0;
  double w1 = 1.0;
  double w2 = 1.0;
  std::vector<double> s;
};

struct FitReport {
  std::vector<double> objective_trace;  // penalized objective per outer pass
  std::vector<double> best_trace;       // running minimum of the trace
  std::vector<int> line_search_failures;  // per paper, cumulative
  bool converged = false;
  int outer_iterations = 0;
  double final_primal_residual = 0.0;  // at the last outer pass
};

struct FitResult {
  std::vector<double> beta;         // thresholded consensus coefficients
  std::vector<FittedPaper> papers;  // input order
  FitReport report;

  PaperParams params_for(std::size_t index) const;
};

// Penalized maximum likelihood over a cohort sharing beta. Each outer pass
// runs the inner EM on (beta, alpha) to tolerance, one threshold and dual
// update on the consensus variables, then one decay-rate descent epoch per
// paper. Returns the state with the lowest penalized objective seen; its
// beta is the thresholded consensus iterate. Deterministic for any job
// count.
FitResult fit(std::span<const FitPaper> papers, const FitConfig& config = {});

}  // namespace citeflux
