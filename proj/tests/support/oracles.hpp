#pragma once

// Independent numerical oracles used only by the test suites. Everything here
// recomputes model quantities from first principles (quadrature, finite
// differences, direct search, order statistics) so the closed forms in the
// library are checked against a second, slower route.

#include <functional>
#include <span>
#include <vector>

#include "citeflux/ppi_model.hpp"

namespace citeflux::testing {

// Adaptive Simpson integration of a smooth function to the given absolute
// tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12);

// Integral of the model intensity over [t0, t1] by quadrature, split at the
// event times where the integrand kinks.
double quadrature_compensator(const PaperParams& p, const MarkedEventSequence& events,
                              double t0, double t1, double tol = 1e-11);

// Central finite-difference gradient of f at x.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::vector<double> x, double h = 1e-6);

// Two-sided Kolmogorov-Smirnov p-value of the sample against Exp(1).
double ks_exp1_pvalue(std::vector<double> samples);

// Golden-section minimization of a unimodal function on [lo, hi].
struct GoldenSectionResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};
GoldenSectionResult golden_section_min(const std::function<double(double)>& f, double lo,
                                       double hi, double tol = 1e-10);

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
};

// Derivative-free minimization; standard simplex moves, restarted once from
// the best point. Tight enough for low-dimensional likelihood surfaces.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<double> start, double step = 0.25,
                             int max_evals = 20000, double tol = 1e-12);

}  // namespace citeflux::testing
