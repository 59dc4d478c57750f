#include "dtm/core/params.hpp"

#include <cmath>

namespace dtm {

ParamId ParamSet::add(std::string name, Mat value) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back({std::move(name), std::move(value)});
  return {params_.size() - 1};
}

ParamId ParamSet::add_vector(std::string name, const Vec& value) {
  Mat m(value.size(), 1);
  m.col(0) = value;
  return add(std::move(name), std::move(m));
}

Eigen::Map<const Vec> ParamSet::vector(ParamId id) const {
  const Mat& m = value(id);
  if (m.cols() != 1) throw ConfigError("parameter " + name(id) + " is not a vector: " + shape_of(m));
  return {m.data(), m.rows()};
}

std::optional<ParamId> ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<Mat> ParamSet::zeros_like() const {
  std::vector<Mat> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return out;
}

real global_norm(const GradMap& grads) {
  real sq = 0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

}  // namespace dtm
