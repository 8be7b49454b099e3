#pragma once

// Binary tensor container and the archive built on it.
//
// Tensor record, all integers little-endian:
//   "LSEF" | u16 version | u8 dtype (f32=0, f64=1) | u8 rank |
//   rank x u64 extents | row-major payload
//
// Archive (checkpoints, datasets):
//   "LSEFPACK" | u16 version | u32 n_meta | n_meta x (str key, str value) |
//   u32 n_entries | n_entries x (str name, tensor record)
// where str = u32 byte length + bytes.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lsef/tensor.hpp"

namespace lsef::io {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint16_t kFormatVersion = 1;

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() {
  return DType::f32;
}
template <>
constexpr DType dtype_of<double>() {
  return DType::f64;
}

// Tensor payload kept in its stored dtype.
struct RawTensor {
  DType dtype = DType::f64;
  Shape shape;
  std::vector<unsigned char> payload;  // little-endian values

  template <typename T>
  static RawTensor from(const Tensor<T>& t);

  // Converts to T if stored as the other dtype.
  template <typename T>
  Tensor<T> to() const;
};

void write_record(std::ostream& os, const RawTensor& t);
RawTensor read_record(std::istream& is);

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  write_record(os, RawTensor::from(t));
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  return read_record(is).to<T>();
}

class Archive {
 public:
  std::map<std::string, std::string> metadata;

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t) {
    put_raw(name, RawTensor::from(t));
  }
  void put_raw(const std::string& name, RawTensor t);

  bool contains(const std::string& name) const;
  const RawTensor& raw(const std::string& name) const;
  template <typename T>
  Tensor<T> get(const std::string& name) const {
    return raw(name).to<T>();
  }
  const std::string& meta(const std::string& key) const;

  const std::vector<std::pair<std::string, RawTensor>>& entries() const { return entries_; }

  void write(std::ostream& os) const;
  static Archive read(std::istream& is);
  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  std::vector<std::pair<std::string, RawTensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace lsef::io
