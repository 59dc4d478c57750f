#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "dtm/error.hpp"

namespace dtm {

template <typename Scalar>
using DenseVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using DenseMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// All model arithmetic runs in double.
using real = double;
using Vec = DenseVec<real>;
using Mat = DenseMat<real>;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename Derived>
std::string shape_of(const Eigen::EigenBase<Derived>& m) {
  return shape_str(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

// ---------------------------------------------------------------------------
// Forward kernels
// ---------------------------------------------------------------------------

// y = W x + b
template <typename Scalar>
DenseVec<Scalar> linear_forward(const DenseVec<Scalar>& x, const DenseMat<Scalar>& W,
                                const DenseVec<Scalar>& b) {
  if (W.cols() != x.size() || b.size() != W.rows()) {
    throw ConfigError("linear: weight " + shape_of(W) + " incompatible with input " +
                      shape_of(x) + " and bias " + shape_of(b));
  }
  return W * x + b;
}

// out[i*d + j] = u[i] * v[j]
template <typename Scalar>
DenseVec<Scalar> outer_flatten(const DenseVec<Scalar>& u, const DenseVec<Scalar>& v) {
  if (u.size() != v.size() || u.size() == 0) {
    throw ConfigError("outer_flatten: length mismatch " + shape_of(u) + " vs " + shape_of(v));
  }
  const Eigen::Index d = u.size();
  DenseVec<Scalar> out(d * d);
  Eigen::Map<DenseMat<Scalar>>(out.data(), d, d).noalias() = u * v.transpose();
  return out;
}

template <typename Scalar>
DenseVec<Scalar> concat(std::span<const DenseVec<Scalar>> parts) {
  if (parts.empty()) throw ConfigError("concat: empty part list");
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  DenseVec<Scalar> out(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

template <typename Scalar>
DenseVec<Scalar> concat(std::initializer_list<DenseVec<Scalar>> parts) {
  return concat<Scalar>(std::span<const DenseVec<Scalar>>(parts.begin(), parts.size()));
}

// Normalized core and reciprocal std, kept for the backward pass.
template <typename Scalar>
struct LayerNormCache {
  DenseVec<Scalar> core;
  Scalar rstd{};
};

// Population variance; core = (x - mean) / sqrt(var + eps).
template <typename Scalar>
LayerNormCache<Scalar> layernorm_core(const DenseVec<Scalar>& x, Scalar eps) {
  if (x.size() == 0) throw ConfigError("layernorm: empty input");
  if (!(eps > Scalar(0))) throw ConfigError("layernorm: eps must be positive");
  const Scalar n = static_cast<Scalar>(x.size());
  const Scalar mean = x.sum() / n;
  const DenseVec<Scalar> centered = x.array() - mean;
  const Scalar var = centered.squaredNorm() / n;
  const Scalar rstd = Scalar(1) / std::sqrt(var + eps);
  return {centered * rstd, rstd};
}

template <typename Scalar>
DenseVec<Scalar> layernorm_forward(const DenseVec<Scalar>& x, const DenseVec<Scalar>& gamma,
                                   const DenseVec<Scalar>& beta, Scalar eps) {
  if (gamma.size() != x.size() || beta.size() != x.size()) {
    throw ConfigError("layernorm: affine " + shape_of(gamma) + "/" + shape_of(beta) +
                      " incompatible with input " + shape_of(x));
  }
  const auto cache = layernorm_core(x, eps);
  return gamma.cwiseProduct(cache.core) + beta;
}

// ---------------------------------------------------------------------------
// Backward kernels (vector-Jacobian products)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LinearGrads {
  DenseVec<Scalar> x;
  DenseMat<Scalar> W;
  DenseVec<Scalar> b;
};

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const DenseVec<Scalar>& x, const DenseMat<Scalar>& W,
                                    const DenseVec<Scalar>& gy) {
  return {W.transpose() * gy, gy * x.transpose(), gy};
}

template <typename Scalar>
std::pair<DenseVec<Scalar>, DenseVec<Scalar>> outer_flatten_backward(const DenseVec<Scalar>& u,
                                                                     const DenseVec<Scalar>& v,
                                                                     const DenseVec<Scalar>& g) {
  const Eigen::Index d = u.size();
  Eigen::Map<const DenseMat<Scalar>> G(g.data(), d, d);
  return {G * v, G.transpose() * u};
}

template <typename Scalar>
struct LayerNormGrads {
  DenseVec<Scalar> x;
  DenseVec<Scalar> gamma;
  DenseVec<Scalar> beta;
};

template <typename Scalar>
LayerNormGrads<Scalar> layernorm_backward(const LayerNormCache<Scalar>& cache,
                                          const DenseVec<Scalar>& gamma,
                                          const DenseVec<Scalar>& gy) {
  const Scalar n = static_cast<Scalar>(gy.size());
  const DenseVec<Scalar> gcore = gy.cwiseProduct(gamma);
  const Scalar mean_g = gcore.sum() / n;
  const Scalar mean_gc = gcore.dot(cache.core) / n;
  DenseVec<Scalar> gx =
      cache.rstd * (gcore.array() - mean_g - cache.core.array() * mean_gc).matrix();
  return {std::move(gx), gy.cwiseProduct(cache.core), gy};
}

}  // namespace dtm
