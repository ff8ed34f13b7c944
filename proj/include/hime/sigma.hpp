// Per-level weight schedules. sigma_bar holds the running prefix sums;
// the escort exponents of the solver are their consecutive ratios.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hime/common.hpp"

namespace hime {

class SigmaSchedule {
public:
  explicit SigmaSchedule(std::vector<double> sigma) : sigma_(std::move(sigma)) {
    if (sigma_.empty()) throw schema_error("sigma schedule must be non-empty");
    sigma_bar_.reserve(sigma_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < sigma_.size(); ++i) {
      const double s = sigma_[i];
      if (!(s > 0.0) || !std::isfinite(s))
        throw schema_error("sigma[" + std::to_string(i + 1) + "] must be a positive real");
      acc += s;
      sigma_bar_.push_back(acc);
    }
  }

  std::size_t depth() const { return sigma_.size(); }
  // 1-based accessors mirroring the level indexing used throughout.
  double sigma(std::size_t i) const { return sigma_.at(i - 1); }
  double sigma_bar(std::size_t i) const { return sigma_bar_.at(i - 1); }
  // Escort exponent between levels i and i+1; always in (0,1).
  double ratio(std::size_t i) const { return sigma_bar(i) / sigma_bar(i + 1); }

  const std::vector<double>& values() const { return sigma_; }
  const std::vector<double>& prefix() const { return sigma_bar_; }

  SigmaSchedule scaled(double c) const {
    if (!(c > 0.0)) throw schema_error("sigma scale factor must be positive");
    std::vector<double> v = sigma_;
    for (double& x : v) x *= c;
    return SigmaSchedule(std::move(v));
  }

private:
  std::vector<double> sigma_;
  std::vector<double> sigma_bar_;
};

}  // namespace hime
