#include "dwt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dwt/errors.hpp"
#include "dwt/rng.hpp"

namespace dwt {

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_relative_error);
  return worst;
}

std::vector<std::string> GradCheckReport::failing(double tolerance) const {
  std::vector<std::string> out;
  for (const auto& p : params)
    if (!(p.max_relative_error < tolerance)) out.push_back(p.name);
  return out;
}

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

namespace {

double evaluate(const std::function<Tensor<double>()>& loss_fn, const std::string& name) {
  double value = 0.0;
  try {
    NoGradGuard guard;
    value = loss_fn().item();
  } catch (const NumericalError& e) {
    throw NumericalError("grad_check: perturbing " + name + ": " + e.what());
  }
  if (!std::isfinite(value)) {
    throw NumericalError("grad_check: non-finite loss while perturbing " + name);
  }
  return value;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           const std::vector<NamedTensor<double>>& params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) {
    Tensor<double> t = p.tensor;
    t.zero_grad();
  }
  Tensor<double> loss = loss_fn();
  if (loss.size() != 1) throw ConfigError("grad_check: loss must be a single value");
  if (!std::isfinite(loss.item())) throw NumericalError("grad_check: non-finite base loss");
  loss.backward();

  Rng rng(options.seed);
  GradCheckReport report;
  for (const auto& p : params) {
    Tensor<double> t = p.tensor;
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    std::vector<std::size_t> indices(t.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (t.size() > options.subsample_threshold) {
      std::vector<std::size_t> picked;
      picked.reserve(options.subsample_count);
      for (std::size_t i = 0; i < options.subsample_count; ++i) picked.push_back(rng.below(t.size()));
      indices = std::move(picked);
    }

    ParamGradError entry;
    entry.name = p.name;
    entry.elements_checked = indices.size();
    auto values = t.mutable_values();
    for (std::size_t idx : indices) {
      const double saved = values[idx];
      auto at = [&](double offset) {
        values[idx] = saved + offset;
        return evaluate(loss_fn, p.name);
      };
      const double h = options.step;
      double numeric = (at(h) - at(-h)) / (2.0 * h);
      if (options.stencil == Stencil::central4) {
        const double wide = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
        numeric = (4.0 * numeric - wide) / 3.0;
      }
      values[idx] = saved;
      const double err = relative_error(analytic[idx], numeric);
      if (err > entry.max_relative_error || entry.elements_checked == 0) {
        entry.max_relative_error = err;
        entry.worst_index = idx;
        entry.autodiff = analytic[idx];
        entry.numeric = numeric;
      }
    }
    report.params.push_back(entry);
  }
  return report;
}

}  // namespace dwt
