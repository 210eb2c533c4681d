#include "dopnet/param_store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dopnet {

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ValidationError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  Tensor grad = Tensor::zeros_like(value);
  entries_.push_back({name, std::move(value), std::move(grad)});
  return entries_.back().value;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

ParamStore::Entry& ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

Tensor& ParamStore::value(const std::string& name) { return find(name).value; }
const Tensor& ParamStore::value(const std::string& name) const { return find(name).value; }
Tensor& ParamStore::grad(const std::string& name) { return find(name).grad; }
const Tensor& ParamStore::grad(const std::string& name) const { return find(name).grad; }

void ParamStore::accumulate(const std::string& name, const Tensor& g) {
  find(name).grad += g;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad = Tensor::zeros_like(e.value);
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ValidationError("DOPW: truncated file");
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_dopw(const ParamStore& store) {
  std::vector<unsigned char> out = {'D', 'O', 'P', 'W'};
  put_u32(out, kDopwVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& e : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.value.ndim()));
    for (std::size_t d : e.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : e.value.data()) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  return out;
}

ParamStore decode_dopw(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "DOPW", 4) != 0) {
    throw ValidationError("DOPW: bad magic");
  }
  Reader r(bytes);
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kDopwVersion) {
    throw ValidationError("DOPW: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  ParamStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.u32());
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = r.u32();
    Tensor value(shape);
    for (double& v : value.data()) v = static_cast<double>(r.f32());
    store.add(name, std::move(value));
  }
  if (!r.done()) throw ValidationError("DOPW: trailing bytes");
  return store;
}

void save_dopw(const ParamStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_dopw(store);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

ParamStore load_dopw(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return decode_dopw(bytes);
}

void assign_values(ParamStore& dst, const ParamStore& src) {
  for (auto& e : dst.entries()) {
    const Tensor& v = src.value(e.name);
    require_shape(v, e.value.shape(), e.name.c_str());
    e.value = v;
  }
}

}  // namespace dopnet
