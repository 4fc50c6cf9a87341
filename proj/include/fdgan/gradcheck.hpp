#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "fdgan/tensor.hpp"

namespace fdgan {

/// Scalar value of a loss together with its gradient wrt the first argument.
template <class T>
struct LossValue {
  double value = 0.0;
  BasicTensor<T> grad;
};

struct GroupError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradReport {
  std::string block;
  double tolerance = 0.0;
  std::vector<GroupError> groups;
  std::string failure;  // non-empty when a non-finite value was met

  double max_error() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
  }
  bool passed() const {
    return failure.empty() &&
           std::all_of(groups.begin(), groups.end(),
                       [&](const GroupError& g) { return g.max_rel_error < tolerance; });
  }
};

inline std::ostream& operator<<(std::ostream& os, const GradReport& r) {
  os << (r.passed() ? "PASS " : "FAIL ") << r.block << "  max_rel_error=" << std::scientific
     << std::setprecision(3) << r.max_error() << "  tol=" << r.tolerance << std::defaultfloat;
  if (!r.failure.empty()) os << "  (" << r.failure << ")";
  for (const auto& g : r.groups) {
    os << "\n    " << std::left << std::setw(40) << g.name << std::scientific << std::setprecision(3)
       << g.max_rel_error << std::defaultfloat << "  (" << g.checked << " coords)";
  }
  return os;
}

struct GradCheckOptions {
  double step = 1e-3;
  // Coordinates sampled per group; 0 checks every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 1234;
};

namespace detail {

inline std::vector<std::size_t> pick_coords(std::size_t n, std::size_t max_coords,
                                            std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_coords != 0 && max_coords < n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_coords);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// Error of each sampled coordinate, normalized by the largest gradient magnitude in the group.
inline double group_error(const std::vector<double>& analytic_all,
                          const std::vector<std::size_t>& coords,
                          const std::vector<double>& numeric) {
  double scale = 0.0;
  for (double a : analytic_all) scale = std::max(scale, std::abs(a));
  for (double n : numeric) scale = std::max(scale, std::abs(n));
  if (scale < 1e-10) return 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    err = std::max(err, std::abs(analytic_all[coords[i]] - numeric[i]) / scale);
  }
  return err;
}

template <class T>
std::vector<double> to_doubles(std::span<const T> v) {
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace detail

/// Checks a block's analytic gradients (computed at the block's own precision) against central
/// finite differences evaluated on a 64-bit twin of the same block. The scalar objective is a fixed
/// random projection of the block output.
template <class Block, class Twin>
GradReport grad_check(const std::string& name, Block& block, Twin& twin, const Tensor& x, double tol,
                      GradCheckOptions opts = {}) {
  GradReport report;
  report.block = name;
  report.tolerance = tol;
  std::mt19937_64 rng(opts.seed);

  ParamList<float> params;
  block.collect(params, name);
  ParamList<double> twin_params;
  twin.collect(twin_params, name);
  zero_grads(params);

  const Tensor out = block.forward(x);
  if (!out.all_finite()) {
    report.failure = "non-finite forward output";
    return report;
  }
  std::uniform_real_distribution<double> proj_dist(-1.0, 1.0);
  std::vector<double> projection(out.size());
  for (auto& p : projection) p = proj_dist(rng);
  Tensor grad_out(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) grad_out[i] = static_cast<float>(projection[i]);
  const Tensor grad_in = block.backward(grad_out);
  if (!grad_in.all_finite()) {
    report.failure = "non-finite input gradient";
    return report;
  }

  BasicTensor<double> xd = x.cast<double>();
  auto objective = [&]() {
    const auto o = twin.forward(xd);
    double s = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) s += projection[i] * o[i];
    return s;
  };
  auto check_group = [&](const std::string& group, std::span<double> values,
                         const std::vector<double>& analytic) {
    const auto coords = detail::pick_coords(values.size(), opts.max_coords, rng);
    std::vector<double> numeric;
    numeric.reserve(coords.size());
    for (auto c : coords) {
      const double orig = values[c];
      values[c] = orig + opts.step;
      const double up = objective();
      values[c] = orig - opts.step;
      const double down = objective();
      values[c] = orig;
      numeric.push_back((up - down) / (2 * opts.step));
    }
    if (!std::all_of(numeric.begin(), numeric.end(), [](double v) { return std::isfinite(v); })) {
      report.failure = "non-finite numeric gradient in " + group;
    }
    report.groups.push_back({group, detail::group_error(analytic, coords, numeric), coords.size()});
  };

  check_group(name + ".input", xd.values(), detail::to_doubles<float>(grad_in.values()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.tensor->has_grad()) continue;
    auto analytic = detail::to_doubles<float>(std::span<const float>(p.tensor->grad()));
    if (!std::all_of(analytic.begin(), analytic.end(), [](double v) { return std::isfinite(v); })) {
      report.failure = "non-finite gradient in " + p.name;
    }
    check_group(p.name, twin_params[i].tensor->values(), analytic);
  }
  return report;
}

/// Convenience overload for block templates that convert between precisions.
template <template <class> class Block>
GradReport grad_check(const std::string& name, Block<float>& block, const Tensor& x, double tol,
                      GradCheckOptions opts = {}) {
  Block<double> twin(block);
  return grad_check(name, block, twin, x, tol, opts);
}

/// Checks the gradient of a scalar loss wrt its input tensor.
inline GradReport grad_check_loss(
    const std::string& name, const std::function<LossValue<float>(const Tensor&)>& loss,
    const std::function<double(const BasicTensor<double>&)>& loss64, const Tensor& x, double tol,
    GradCheckOptions opts = {}) {
  GradReport report;
  report.block = name;
  report.tolerance = tol;
  std::mt19937_64 rng(opts.seed);
  const auto lv = loss(x);
  if (!std::isfinite(lv.value) || !lv.grad.all_finite()) {
    report.failure = "non-finite loss or gradient";
    return report;
  }
  BasicTensor<double> xd = x.cast<double>();
  const auto coords = detail::pick_coords(xd.size(), opts.max_coords, rng);
  std::vector<double> numeric;
  for (auto c : coords) {
    const double orig = xd[c];
    xd[c] = orig + opts.step;
    const double up = loss64(xd);
    xd[c] = orig - opts.step;
    const double down = loss64(xd);
    xd[c] = orig;
    numeric.push_back((up - down) / (2 * opts.step));
  }
  report.groups.push_back({name + ".input",
                           detail::group_error(detail::to_doubles<float>(lv.grad.values()), coords,
                                               numeric),
                           coords.size()});
  return report;
}

}  // namespace fdgan
