#pragma once

#include <cstddef>
#include <new>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "stemgen/error.hpp"

namespace stemgen {

/// Over-aligned allocator. Eigen peels vectorized loops by address, so a
/// fixed buffer alignment keeps results bit-identical from run to run.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{Align}); }
  template <class U>
  bool operator==(const AlignedAllocator<U, Align>&) const { return true; }
};

/// Flat parameter or gradient buffer.
template <class Scalar>
using ParamVector = std::vector<Scalar, AlignedAllocator<Scalar>>;

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Named 2-D arrays packed into one flat buffer so optimizers and gradient
/// buffers can treat the whole model as a single vector.
template <class Scalar>
class ParameterSet {
 public:
  using Map = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMap = Eigen::Map<const RowMatrix<Scalar>>;

  std::size_t add(const std::string& name, int rows, int cols) {
    if (by_name_.count(name)) throw InvalidArgument("duplicate parameter " + name);
    ParamInfo info{name, values_.size(), rows, cols};
    values_.resize(values_.size() + info.size(), Scalar(0));
    by_name_[name] = infos_.size();
    infos_.push_back(info);
    return infos_.size() - 1;
  }

  std::size_t id(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw InvalidArgument("unknown parameter " + name);
    return it->second;
  }

  Map mat(std::size_t id) {
    const auto& i = infos_[id];
    return Map(values_.data() + i.offset, i.rows, i.cols);
  }
  ConstMap mat(std::size_t id) const {
    const auto& i = infos_[id];
    return ConstMap(values_.data() + i.offset, i.rows, i.cols);
  }

  /// View into an external buffer with this set's layout (gradients).
  Map mat(std::size_t id, ParamVector<Scalar>& buffer) const {
    const auto& i = infos_[id];
    return Map(buffer.data() + i.offset, i.rows, i.cols);
  }

  const std::vector<ParamInfo>& infos() const { return infos_; }
  ParamVector<Scalar>& values() { return values_; }
  const ParamVector<Scalar>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<ParamInfo> infos_;
  std::unordered_map<std::string, std::size_t> by_name_;
  ParamVector<Scalar> values_;
};

}  // namespace stemgen
