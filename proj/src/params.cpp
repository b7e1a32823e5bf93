#include "hoist/params.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hoist {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (values_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  names_.push_back(name);
  return values_[name] = std::move(init);
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

int64_t ParamStore::total_elements() const {
  int64_t n = 0;
  for (const auto& [k, v] : values_) n += v.numel();
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& [k, v] : values_)
    if (!v.all_finite()) return false;
  return true;
}

Tensor& ParamStore::moment1(const std::string& name) {
  auto it = m1_.find(name);
  if (it == m1_.end()) it = m1_.emplace(name, Tensor::zeros(get(name).shape())).first;
  return it->second;
}

Tensor& ParamStore::moment2(const std::string& name) {
  auto it = m2_.find(name);
  if (it == m2_.end()) it = m2_.emplace(name, Tensor::zeros(get(name).shape())).first;
  return it->second;
}

ParamBinding::ParamBinding(Graph& g, const ParamStore& store) {
  for (const auto& name : store.names()) {
    Graph::Val v = g.leaf(store.get(name), /*requires_grad=*/true);
    vals_[name] = v;
    entries_.emplace_back(name, v);
  }
}

Graph::Val ParamBinding::operator[](const std::string& name) const {
  auto it = vals_.find(name);
  if (it == vals_.end()) throw std::invalid_argument("unbound parameter: " + name);
  return it->second;
}

namespace {

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw std::runtime_error("checkpoint: truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_str(std::ofstream& f, const std::string& s) {
  write_u32(f, static_cast<uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::ifstream& f) {
  const uint32_t n = read_u32(f);
  if (n > (1u << 26)) throw std::runtime_error("checkpoint: unreasonable string length");
  std::string s(n, '\0');
  f.read(s.data(), n);
  if (!f) throw std::runtime_error("checkpoint: truncated");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store,
                     const std::string& config_echo) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path.string());
  f.write(kCheckpointMagic, 9);
  write_u32(f, 1);  // format version
  write_str(f, config_echo);
  write_u32(f, static_cast<uint32_t>(store.count()));
  for (const auto& name : store.names()) {
    const Tensor& t = store.get(name);
    write_str(f, name);
    write_u32(f, static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) write_u32(f, static_cast<uint32_t>(t.dim(i)));
    // doubles stored as 64-bit little-endian words
    for (int64_t i = 0; i < t.numel(); ++i) {
      uint64_t bits;
      std::memcpy(&bits, &t[i], 8);
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
      f.write(reinterpret_cast<char*>(b), 8);
    }
  }
  if (!f) throw std::runtime_error("short checkpoint write: " + path.string());
}

std::string load_checkpoint(const std::filesystem::path& path, ParamStore& store) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[9];
  f.read(magic, 9);
  if (!f || std::memcmp(magic, kCheckpointMagic, 9) != 0)
    throw std::runtime_error("not a checkpoint (bad magic): " + path.string());
  const uint32_t version = read_u32(f);
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const std::string config_echo = read_str(f);
  const uint32_t count = read_u32(f);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = read_str(f);
    const uint32_t rank = read_u32(f);
    if (rank > 4) throw std::runtime_error("checkpoint: tensor rank > 4");
    std::vector<int> shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(read_u32(f)));
    Tensor t(shape);
    for (int64_t k = 0; k < t.numel(); ++k) {
      unsigned char b[8];
      f.read(reinterpret_cast<char*>(b), 8);
      if (!f) throw std::runtime_error("checkpoint: truncated tensor " + name);
      uint64_t bits = 0;
      for (int j = 0; j < 8; ++j) bits |= static_cast<uint64_t>(b[j]) << (8 * j);
      std::memcpy(&t[k], &bits, 8);
    }
    if (store.has(name))
      store.get(name) = std::move(t);
    else
      store.add(name, std::move(t));
  }
  return config_echo;
}

}  // namespace hoist
