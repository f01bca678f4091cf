#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "navlab/nnet/tensor.hpp"

namespace navlab::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

/// A named set of tensors trained or frozen together.
struct ParamGroup {
  std::string name;
  bool frozen = false;
  std::vector<Parameter> params;

  std::size_t scalar_count() const;
};

struct ParamId {
  std::uint32_t group = 0;
  std::uint32_t index = 0;
};

/// Ordered parameter groups. Ids are positional: removing a group
/// invalidates ids into later groups.
class ParamStore {
 public:
  ParamGroup& add_group(std::string name, bool frozen = false);
  bool has_group(std::string_view name) const;
  ParamGroup& group(std::string_view name);
  const ParamGroup& group(std::string_view name) const;
  void remove_group(std::string_view name);
  void set_frozen(std::string_view name, bool frozen);

  ParamId add(std::string_view group, std::string name, Tensor init);
  ParamId find(std::string_view group, std::string_view name) const;

  Parameter& at(ParamId id) { return groups_[id.group].params[id.index]; }
  const Parameter& at(ParamId id) const { return groups_[id.group].params[id.index]; }
  const Tensor& value(ParamId id) const { return at(id).value; }
  bool frozen(ParamId id) const { return groups_[id.group].frozen; }

  std::span<ParamGroup> groups() { return groups_; }
  std::span<const ParamGroup> groups() const { return groups_; }
  std::size_t scalar_count() const;

  /// SHA-256 over the group's tensor names, shapes and raw f64 bytes.
  std::string checksum(std::string_view group) const;

  /// "MUVP" checkpoint: per tensor (group, name, shape, f64 data, frozen).
  void write(std::ostream& os) const;
  static ParamStore read(std::istream& is);
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

 private:
  std::size_t group_index(std::string_view name) const;
  std::vector<ParamGroup> groups_;
};

/// Gradient buffers aligned with a ParamStore. Frozen groups get no
/// storage, so their gradients read as zero.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& params);

  /// nullptr when the parameter's group was frozen at construction.
  Tensor* slot(ParamId id);
  const Tensor* slot(ParamId id) const;

  void zero();
  void add(const Gradients& other);
  void scale(double s);
  double squared_norm() const;
  /// Value of one scalar gradient (0 for frozen groups).
  double get(ParamId id, std::size_t i) const;

 private:
  std::vector<std::vector<Tensor>> grads_;
};

}  // namespace navlab::nn
