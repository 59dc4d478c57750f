#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dtm/core/dense.hpp"

namespace dtm {

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

struct Param {
  std::string name;
  Mat value;  // vectors are stored as n x 1
};

// Named, ordered collection of learnable tensors. Order is insertion order and
// defines the layout of gradients, optimizer moments and checkpoints.
class ParamSet {
 public:
  ParamId add(std::string name, Mat value);
  ParamId add_vector(std::string name, const Vec& value);

  std::size_t size() const { return params_.size(); }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Mat& value(ParamId id) const { return params_.at(id.index).value; }
  Mat& value(ParamId id) { return params_.at(id.index).value; }
  Eigen::Map<const Vec> vector(ParamId id) const;
  const std::string& name(ParamId id) const { return params_.at(id.index).name; }

  std::optional<ParamId> find(const std::string& name) const;
  std::size_t scalar_count() const;
  std::vector<Mat> zeros_like() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
};

// Gradients laid out like the ParamSet they were computed for.
using GradMap = std::vector<Mat>;

real global_norm(const GradMap& grads);

}  // namespace dtm
