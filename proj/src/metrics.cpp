#include "dtm/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dtm/error.hpp"

namespace dtm {

namespace {

void check_lengths(std::span<const real> pred, std::span<const real> label, const char* who) {
  if (pred.size() != label.size()) {
    throw ConfigError(std::string(who) + ": length mismatch " + std::to_string(pred.size()) +
                      " vs " + std::to_string(label.size()));
  }
  if (pred.empty()) throw ConfigError(std::string(who) + ": empty input");
}

}  // namespace

real pearson(std::span<const real> pred, std::span<const real> label) {
  check_lengths(pred, label, "pearson");
  if (pred.size() < 2) throw ConfigError("pearson: needs at least two samples");
  const real n = static_cast<real>(pred.size());
  real mp = 0, ml = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    ml += label[i];
  }
  mp /= n;
  ml /= n;
  real sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const real dx = pred[i] - mp;
    const real dy = label[i] - ml;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) {
    throw NumericError(std::string("pearson: correlation undefined for constant ") +
                       (sxx == 0 ? "predictions" : "labels"));
  }
  const real r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

real mae(std::span<const real> pred, std::span<const real> label) {
  check_lengths(pred, label, "mae");
  real acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - label[i]);
  return acc / static_cast<real>(pred.size());
}

real rmse(std::span<const real> pred, std::span<const real> label) {
  check_lengths(pred, label, "rmse");
  real acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const real d = pred[i] - label[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<real>(pred.size()));
}

MetricsReport evaluate_metrics(std::span<const real> pred, std::span<const real> label) {
  return {pearson(pred, label), mae(pred, label), rmse(pred, label), pred.size()};
}

std::string format_table(const MetricsReport& m, const std::string& label) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %9s\n%-16s %8.4f %8.4f %9.4f\n", "Method", "r(↑)",
                "MAE(↓)", "RMSE(↓)", label.c_str(), m.r, m.mae, m.rmse);
  return buf;
}

std::string format_kv(const MetricsReport& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "n=%zu r=%.17g mae=%.17g rmse=%.17g\n", m.n, m.r, m.mae, m.rmse);
  return buf;
}

}  // namespace dtm
