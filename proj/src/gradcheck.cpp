#include "cala/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>

namespace cala {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport check_gradients(CalaModel& model, const std::vector<TripletRecord>& batch,
                                const GradcheckOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  auto& store = model.params();

  store.zero_grad();
  model.forward(batch).total.backward();

  GradcheckReport report;
  for (const auto& p : store.params()) {
    GroupCheck g;
    g.name = p.name;
    g.frozen = p.frozen;
    g.entries = p.value.size();
    if (p.frozen) {
      report.groups.push_back(g);
      continue;
    }
    std::vector<double> analytic = p.value.grad();
    if (opts.corrupt_group && *opts.corrupt_group == p.name) {
      for (double& a : analytic) a += 1e-3 * (1.0 + std::abs(a));
    }
    Tensor handle = p.value;
    auto w = handle.mutable_data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double saved = w[k];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard no_grad;
        w[k] = saved + opts.step;
        plus = model.forward(batch).total.item();
        w[k] = saved - opts.step;
        minus = model.forward(batch).total.item();
      }
      w[k] = saved;
      const double numeric = (plus - minus) / (2.0 * opts.step);
      g.max_rel_error = std::max(g.max_rel_error, relative_error(analytic[k], numeric, opts.denominator_floor));
      g.max_abs_error = std::max(g.max_abs_error, std::abs(analytic[k] - numeric));
    }
    g.passed = g.max_rel_error < opts.tolerance;
    report.passed = report.passed && g.passed;
    report.groups.push_back(g);
  }
  store.zero_grad();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string GradcheckReport::format() const {
  std::size_t width = 5;
  for (const auto& g : groups) width = std::max(width, g.name.size());
  std::string out = fmt::format("{:<{}}  {:>7}  {:>12}  {:>12}  status\n", "group", width, "entries",
                                "max_rel_err", "max_abs_err");
  for (const auto& g : groups) {
    if (g.frozen) {
      out += fmt::format("{:<{}}  {:>7}  {:>12}  {:>12}  skipped (frozen)\n", g.name, width, g.entries, "-", "-");
      continue;
    }
    out += fmt::format("{:<{}}  {:>7}  {:>12.3e}  {:>12.3e}  {}\n", g.name, width, g.entries, g.max_rel_error,
                       g.max_abs_error, g.passed ? "ok" : "FAIL");
  }
  out += fmt::format("gradcheck {} in {:.2f}s\n", passed ? "PASSED" : "FAILED", seconds);
  return out;
}

}  // namespace cala
