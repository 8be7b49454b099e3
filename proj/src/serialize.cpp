#include "lsef/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lsef/error.hpp"

namespace lsef::io {
namespace {

constexpr char kTensorMagic[4] = {'L', 'S', 'E', 'F'};
constexpr char kArchiveMagic[8] = {'L', 'S', 'E', 'F', 'P', 'A', 'C', 'K'};

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  require(is.good(), ErrorKind::data, "truncated tensor container");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

void put_str(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
  const auto n = get_le<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  require(is.good() || (n == 0), ErrorKind::data, "truncated string in archive");
  return s;
}

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
void encode(const T* values, std::size_t n, std::vector<unsigned char>& out) {
  out.resize(n * sizeof(T));
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<Bits<T>>(values[i]);
    for (std::size_t b = 0; b < sizeof(T); ++b)
      out[i * sizeof(T) + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
}

template <typename T>
std::vector<T> decode(const std::vector<unsigned char>& in) {
  const std::size_t n = in.size() / sizeof(T);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Bits<T> bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
      bits |= static_cast<Bits<T>>(in[i * sizeof(T) + b]) << (8 * b);
    out[i] = std::bit_cast<T>(bits);
  }
  return out;
}

}  // namespace

template <typename T>
RawTensor RawTensor::from(const Tensor<T>& t) {
  RawTensor r;
  r.dtype = dtype_of<T>();
  r.shape = t.shape();
  encode(t.data().data(), t.numel(), r.payload);
  return r;
}

template <typename T>
Tensor<T> RawTensor::to() const {
  if (dtype == DType::f32) {
    auto v = decode<float>(payload);
    return Tensor<T>::from(shape, std::vector<T>(v.begin(), v.end()));
  }
  auto v = decode<double>(payload);
  return Tensor<T>::from(shape, std::vector<T>(v.begin(), v.end()));
}

template RawTensor RawTensor::from(const Tensor<float>&);
template RawTensor RawTensor::from(const Tensor<double>&);
template Tensor<float> RawTensor::to<float>() const;
template Tensor<double> RawTensor::to<double>() const;

void write_record(std::ostream& os, const RawTensor& t) {
  require(t.shape.size() <= 255, ErrorKind::usage, "tensor rank exceeds container limit");
  os.write(kTensorMagic, 4);
  put_le<std::uint16_t>(os, kFormatVersion);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype));
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape.size()));
  for (auto d : t.shape) put_le<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.payload.data()),
           static_cast<std::streamsize>(t.payload.size()));
  require(os.good(), ErrorKind::io, "failed writing tensor container");
}

RawTensor read_record(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, kTensorMagic, 4) == 0, ErrorKind::data,
          "not an LSEF tensor container (bad magic)");
  const auto version = get_le<std::uint16_t>(is);
  require(version == kFormatVersion, ErrorKind::data,
          "unsupported container version " + std::to_string(version));
  const auto tag = get_le<std::uint8_t>(is);
  require(tag <= 1, ErrorKind::data, "unknown dtype tag " + std::to_string(tag));
  RawTensor t;
  t.dtype = static_cast<DType>(tag);
  const auto rank = get_le<std::uint8_t>(is);
  t.shape.resize(rank);
  for (auto& d : t.shape) {
    d = static_cast<std::size_t>(get_le<std::uint64_t>(is));
    require(d > 0, ErrorKind::data, "zero extent in tensor container");
  }
  std::size_t count = 1;
  for (auto d : t.shape) {
    require(d <= (std::size_t{1} << 40) / count, ErrorKind::data, "implausible tensor extents in container");
    count *= d;
  }
  t.payload.resize(count * dtype_size(t.dtype));
  is.read(reinterpret_cast<char*>(t.payload.data()), static_cast<std::streamsize>(t.payload.size()));
  require(is.good() || (is.eof() && is.gcount() == static_cast<std::streamsize>(t.payload.size())),
          ErrorKind::data, "truncated tensor payload");
  return t;
}

void Archive::put_raw(const std::string& name, RawTensor t) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    entries_[it->second].second = std::move(t);
    return;
  }
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(t));
}

bool Archive::contains(const std::string& name) const { return index_.count(name) > 0; }

const RawTensor& Archive::raw(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorKind::data, "archive has no entry '" + name + "'");
  return entries_[it->second].second;
}

const std::string& Archive::meta(const std::string& key) const {
  auto it = metadata.find(key);
  require(it != metadata.end(), ErrorKind::data, "archive has no metadata key '" + key + "'");
  return it->second;
}

void Archive::write(std::ostream& os) const {
  os.write(kArchiveMagic, 8);
  put_le<std::uint16_t>(os, kFormatVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    put_str(os, k);
    put_str(os, v);
  }
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    put_str(os, name);
    write_record(os, t);
  }
  require(os.good(), ErrorKind::io, "failed writing archive");
}

Archive Archive::read(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, kArchiveMagic, 8) == 0, ErrorKind::data,
          "not an LSEF archive (bad magic)");
  const auto version = get_le<std::uint16_t>(is);
  require(version == kFormatVersion, ErrorKind::data,
          "unsupported archive version " + std::to_string(version));
  Archive a;
  const auto n_meta = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = get_str(is);
    a.metadata[k] = get_str(is);
  }
  const auto n = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = get_str(is);
    a.put_raw(name, read_record(is));
  }
  return a;
}

void Archive::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.is_open(), ErrorKind::io, "cannot open '" + path + "' for writing");
  write(os);
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.is_open(), ErrorKind::io, "cannot open '" + path + "'");
  return read(is);
}

}  // namespace lsef::io
