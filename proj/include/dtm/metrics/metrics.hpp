#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "dtm/core/dense.hpp"

namespace dtm {

// Sample Pearson r. Throws NumericError when either input is constant and
// ConfigError on length mismatch or fewer than two samples.
real pearson(std::span<const real> pred, std::span<const real> label);
real mae(std::span<const real> pred, std::span<const real> label);
real rmse(std::span<const real> pred, std::span<const real> label);

struct MetricsReport {
  real r = 0;
  real mae = 0;
  real rmse = 0;
  std::size_t n = 0;
};

MetricsReport evaluate_metrics(std::span<const real> pred, std::span<const real> label);

// "r(↑)  MAE(↓)  RMSE(↓)" table row and a key=value line for scripts.
std::string format_table(const MetricsReport& m, const std::string& label);
std::string format_kv(const MetricsReport& m);

}  // namespace dtm
