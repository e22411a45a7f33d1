#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "orient/error.hpp"
#include "orient/rng.hpp"

namespace orient {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
template <class S>
using MatMap = Eigen::Map<Mat<S>>;
template <class S>
using ConstMatMap = Eigen::Map<const Mat<S>>;
template <class S>
using VecMap = Eigen::Map<Vec<S>>;
template <class S>
using ConstVecMap = Eigen::Map<const Vec<S>>;

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;  // 1 for vectors
  std::size_t offset = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * cols; }
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

// A flat buffer of named row-major tensors. Gradients and optimizer moments
// use a ParamSet with the same layout, so whole-model operations (updates,
// clipping, serialization) are plain loops over flat().
template <class S>
class ParamSet {
 public:
  using Id = std::size_t;

  Id add(std::string name, int rows, int cols = 1) {
    specs_.push_back({std::move(name), rows, cols, data_.size()});
    data_.resize(data_.size() + specs_.back().size(), S(0));
    return specs_.size() - 1;
  }

  MatMap<S> mat(Id id) {
    const auto& t = specs_[id];
    return MatMap<S>(data_.data() + t.offset, t.rows, t.cols);
  }
  ConstMatMap<S> mat(Id id) const {
    const auto& t = specs_[id];
    return ConstMatMap<S>(data_.data() + t.offset, t.rows, t.cols);
  }
  VecMap<S> vec(Id id) {
    const auto& t = specs_[id];
    return VecMap<S>(data_.data() + t.offset, static_cast<Eigen::Index>(t.size()));
  }
  ConstVecMap<S> vec(Id id) const {
    const auto& t = specs_[id];
    return ConstVecMap<S>(data_.data() + t.offset, static_cast<Eigen::Index>(t.size()));
  }

  std::span<S> flat() noexcept { return data_; }
  std::span<const S> flat() const noexcept { return data_; }
  std::span<S> flat(Id id) { return std::span<S>(data_).subspan(specs_[id].offset, specs_[id].size()); }
  std::span<const S> flat(Id id) const {
    return std::span<const S>(data_).subspan(specs_[id].offset, specs_[id].size());
  }

  const std::vector<TensorSpec>& specs() const noexcept { return specs_; }
  std::size_t size() const noexcept { return data_.size(); }

  Id find(const std::string& name) const {
    for (Id i = 0; i < specs_.size(); ++i) {
      if (specs_[i].name == name) return i;
    }
    throw InputError("no tensor named " + name);
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), S(0)); }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    out.set_zero();
    return out;
  }

  template <class T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (const auto& t : specs_) out.add(t.name, t.rows, t.cols);
    for (std::size_t i = 0; i < data_.size(); ++i) out.flat()[i] = static_cast<T>(data_[i]);
    return out;
  }

  bool same_layout(const ParamSet& o) const { return specs_ == o.specs_; }

  void fill_normal(Id id, Rng& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (S& v : flat(id)) v = static_cast<S>(dist(rng));
  }
  void fill(Id id, S value) {
    for (S& v : flat(id)) v = value;
  }

  bool all_finite() const {
    for (S v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  std::vector<TensorSpec> specs_;
  std::vector<S> data_;
};

template <class S>
double squared_norm(std::span<const S> v) {
  double acc = 0.0;
  for (S x : v) acc += static_cast<double>(x) * static_cast<double>(x);
  return acc;
}

}  // namespace orient
