#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rgk/core/rng.hpp"
#include "rgk/numerics/tensor.hpp"

namespace rgk {

struct GradCheckOptions {
  // Entries probed per parameter; 0 probes every entry.
  std::size_t probes_per_param = 0;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error. Gradients below it compare on
  // an absolute scale, which keeps central-difference roundoff (about
  // 1e-11 at step 1e-5) from dominating near-zero entries.
  double floor = 1e-4;
  // Probes whose one-sided differences disagree (a ReLU/max switch inside
  // the step) are skipped and counted instead of compared.
  bool skip_nonsmooth = true;
};

struct GradCheckReport {
  std::vector<double> max_rel_error;  // one per parameter
  double worst = 0.0;
  bool pass = true;
  std::size_t probes = 0;
  std::size_t skipped = 0;
  std::string failure;  // location of the worst probe or of a non-finite value
};

// Compares tape gradients of scalar f against central differences.
inline GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                  double step = 1e-5, double tol = 1e-6, GradCheckOptions options = {}) {
  if (!(step > 0 && step <= 1e-2)) throw std::invalid_argument("grad_check: step must lie in (0, 1e-2]");
  GradCheckReport report;
  report.max_rel_error.assign(params.size(), 0.0);
  for (auto& p : params) p.zero_grad();
  double f0;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    f0 = loss.item();
    // A loss independent of every parameter is never recorded; its gradient is zero.
    if (loss.node().tape != nullptr) backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  auto eval = [&]() {
    NoGradScope nograd;
    return f().item();
  };
  auto fail = [&](std::string why) {
    report.pass = false;
    if (report.failure.empty()) report.failure = std::move(why);
  };
  if (!std::isfinite(f0)) {
    fail("non-finite loss at the base point");
    return report;
  }

  Rng rng(stream_seed(options.seed, "grad_check"));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& values = params[k].mutable_values();
    std::vector<std::size_t> entries;
    if (options.probes_per_param == 0 || options.probes_per_param >= values.size()) {
      for (std::size_t i = 0; i < values.size(); ++i) entries.push_back(i);
    } else {
      for (std::size_t i = 0; i < options.probes_per_param; ++i) entries.push_back(uniform_index(rng, values.size()));
    }
    for (std::size_t e : entries) {
      double saved = values[e];
      values[e] = saved + step;
      double fp = eval();
      values[e] = saved - step;
      double fm = eval();
      values[e] = saved;
      std::string where = detail::concat("param ", k, " entry ", e);
      double a = analytic[k][e];
      if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(a)) {
        fail("non-finite value at " + where);
        continue;
      }
      double fwd = (fp - f0) / step, bwd = (f0 - fm) / step;
      double scale = std::max({std::fabs(fwd), std::fabs(bwd), options.floor});
      if (options.skip_nonsmooth && std::fabs(fwd - bwd) > 1e-2 * scale) {
        ++report.skipped;
        continue;
      }
      double numeric = (fp - fm) / (2.0 * step);
      double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), options.floor});
      ++report.probes;
      if (rel > report.max_rel_error[k]) report.max_rel_error[k] = rel;
      if (rel > report.worst) {
        report.worst = rel;
        if (rel >= tol) report.failure = detail::concat(where, ": analytic ", a, " numeric ", numeric);
      }
    }
  }
  if (report.worst >= tol) report.pass = false;
  if (report.probes == 0 || report.skipped > report.probes) fail("too many non-smooth probes");
  return report;
}

}  // namespace rgk
