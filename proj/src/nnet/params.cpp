#include "navlab/nnet/params.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "navlab/common.hpp"

namespace navlab::nn {

std::size_t ParamGroup::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

std::size_t ParamStore::group_index(std::string_view name) const {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name == name) return i;
  }
  throw ConfigError("params: no group named '" + std::string(name) + "'");
}

ParamGroup& ParamStore::add_group(std::string name, bool frozen) {
  if (has_group(name)) throw ConfigError("params: duplicate group '" + name + "'");
  groups_.push_back(ParamGroup{std::move(name), frozen, {}});
  return groups_.back();
}

bool ParamStore::has_group(std::string_view name) const {
  return std::any_of(groups_.begin(), groups_.end(), [&](const auto& g) { return g.name == name; });
}

ParamGroup& ParamStore::group(std::string_view name) { return groups_[group_index(name)]; }
const ParamGroup& ParamStore::group(std::string_view name) const { return groups_[group_index(name)]; }

void ParamStore::remove_group(std::string_view name) {
  groups_.erase(groups_.begin() + static_cast<std::ptrdiff_t>(group_index(name)));
}

void ParamStore::set_frozen(std::string_view name, bool frozen) { group(name).frozen = frozen; }

ParamId ParamStore::add(std::string_view group_name, std::string name, Tensor init) {
  const auto gi = group_index(group_name);
  auto& g = groups_[gi];
  for (const auto& p : g.params) {
    if (p.name == name) throw ConfigError("params: duplicate tensor '" + name + "'");
  }
  Parameter p{std::move(name), std::move(init), {}, {}};
  p.m = Tensor::zeros_like(p.value);
  p.v = Tensor::zeros_like(p.value);
  g.params.push_back(std::move(p));
  return {static_cast<std::uint32_t>(gi), static_cast<std::uint32_t>(g.params.size() - 1)};
}

ParamId ParamStore::find(std::string_view group_name, std::string_view name) const {
  const auto gi = group_index(group_name);
  const auto& g = groups_[gi];
  for (std::size_t i = 0; i < g.params.size(); ++i) {
    if (g.params[i].name == name) return {static_cast<std::uint32_t>(gi), static_cast<std::uint32_t>(i)};
  }
  throw ConfigError("params: no tensor '" + std::string(name) + "' in group '" + std::string(group_name) + "'");
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.scalar_count();
  return n;
}

std::string ParamStore::checksum(std::string_view name) const {
  const auto& g = group(name);
  std::string bytes;
  for (const auto& p : g.params) {
    bytes += p.name;
    bytes.push_back('\0');
    for (auto d : p.value.shape()) bytes += std::to_string(d) + ",";
    const auto data = p.value.data();
    bytes.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  }
  return sha256_hex(std::string_view(bytes));
}

void ParamStore::write(std::ostream& os) const {
  std::uint32_t entries = 0;
  for (const auto& g : groups_) entries += static_cast<std::uint32_t>(g.params.size());
  os.write("MUVP", 4);
  io::write_u16(os, 1);
  io::write_u32(os, entries);
  for (const auto& g : groups_) {
    for (const auto& p : g.params) {
      io::write_str16(os, g.name);
      io::write_str16(os, p.name);
      io::write_u16(os, static_cast<std::uint16_t>(p.value.rank()));
      for (auto d : p.value.shape()) io::write_u32(os, static_cast<std::uint32_t>(d));
      for (double v : p.value.data()) io::write_f64(os, v);
      io::write_u8(os, g.frozen ? 1 : 0);
    }
  }
}

ParamStore ParamStore::read(std::istream& is) {
  io::expect_magic(is, "MUVP");
  if (io::read_u16(is) != 1) throw FormatError("MUVP: unsupported version");
  const auto entries = io::read_u32(is);
  ParamStore store;
  for (std::uint32_t e = 0; e < entries; ++e) {
    auto group = io::read_str16(is);
    auto name = io::read_str16(is);
    const auto rank = io::read_u16(is);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = io::read_u32(is);
      n *= d;
    }
    if (n > (1u << 26)) throw FormatError("MUVP: tensor too large");
    std::vector<double> data(n);
    for (auto& v : data) v = io::read_f64(is);
    const bool frozen = io::read_u8(is) != 0;
    if (!store.has_group(group)) store.add_group(group, frozen);
    if (store.group(group).frozen != frozen) throw FormatError("MUVP: inconsistent frozen flag in " + group);
    store.add(group, std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

void ParamStore::save(const std::string& path) const {
  std::ostringstream os;
  write(os);
  io::write_file(path, os.str());
}

ParamStore ParamStore::load(const std::string& path) {
  std::istringstream is(io::read_file(path));
  return read(is);
}

Gradients::Gradients(const ParamStore& params) {
  for (const auto& g : params.groups()) {
    auto& slots = grads_.emplace_back();
    for (const auto& p : g.params) slots.push_back(g.frozen ? Tensor{} : Tensor::zeros_like(p.value));
  }
}

Tensor* Gradients::slot(ParamId id) {
  if (id.group >= grads_.size() || id.index >= grads_[id.group].size()) return nullptr;
  auto& t = grads_[id.group][id.index];
  return t.empty() ? nullptr : &t;
}

const Tensor* Gradients::slot(ParamId id) const { return const_cast<Gradients*>(this)->slot(id); }

void Gradients::zero() {
  for (auto& g : grads_) {
    for (auto& t : g) t.fill(0.0);
  }
}

void Gradients::add(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) throw ConfigError("gradients: layout mismatch");
  for (std::size_t gi = 0; gi < grads_.size(); ++gi) {
    for (std::size_t pi = 0; pi < grads_[gi].size(); ++pi) {
      auto& dst = grads_[gi][pi];
      const auto& src = other.grads_[gi][pi];
      if (dst.empty() || src.empty()) continue;
      auto d = dst.data();
      auto s = src.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
  }
}

void Gradients::scale(double s) {
  for (auto& g : grads_) {
    for (auto& t : g) {
      for (auto& v : t.data()) v *= s;
    }
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) {
    for (const auto& t : g) s += t.squared_norm();
  }
  return s;
}

double Gradients::get(ParamId id, std::size_t i) const {
  const Tensor* t = slot(id);
  return t ? (*t)[i] : 0.0;
}

}  // namespace navlab::nn
