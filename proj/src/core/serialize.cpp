// SPDX-License-Identifier: Apache-2.0
#include "mssf/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

namespace mssf {
namespace io {

namespace {

template <typename U>
void put_le(std::ostream& os, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  read_bytes(is, buf, sizeof(U));
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) { put_le(os, v); }
void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
void write_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}
void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

std::uint8_t read_u8(std::istream& is) { return get_le<std::uint8_t>(is); }
std::uint32_t read_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return get_le<std::uint64_t>(is); }

void read_bytes(std::istream& is, void* data, std::size_t n) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("truncated input");
}

std::string read_string(std::istream& is, std::size_t max_len) {
  const std::uint32_t n = read_u32(is);
  if (n > max_len) throw FormatError("string record of " + std::to_string(n) + " bytes exceeds limit");
  std::string s(n, '\0');
  read_bytes(is, s.data(), n);
  return s;
}

}  // namespace io

namespace {

constexpr char kTensorMagic[4] = {'T', 'N', 'S', 'R'};

template <typename U, typename Bits>
void write_elements(std::ostream& os, std::span<const U> values) {
  static_assert(sizeof(U) == sizeof(Bits));
  std::vector<unsigned char> buf(values.size() * sizeof(U));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Bits b = std::bit_cast<Bits>(values[i]);
    for (std::size_t k = 0; k < sizeof(U); ++k)
      buf[i * sizeof(U) + k] = static_cast<unsigned char>((b >> (8 * k)) & 0xff);
  }
  io::write_bytes(os, buf.data(), buf.size());
}

template <typename U, typename Bits>
std::vector<U> read_elements(std::istream& is, std::size_t count) {
  std::vector<unsigned char> buf(count * sizeof(U));
  io::read_bytes(is, buf.data(), buf.size());
  std::vector<U> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Bits b = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) b |= static_cast<Bits>(buf[i * sizeof(U) + k]) << (8 * k);
    out[i] = std::bit_cast<U>(b);
  }
  return out;
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  io::write_bytes(os, kTensorMagic, 4);
  io::write_u8(os, static_cast<std::uint8_t>(dtype_of<T>()));
  io::write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) io::write_u64(os, d);
  if constexpr (std::is_same_v<T, float>)
    write_elements<float, std::uint32_t>(os, t.data());
  else
    write_elements<double, std::uint64_t>(os, t.data());
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  char magic[4];
  io::read_bytes(is, magic, 4);
  if (!std::equal(magic, magic + 4, kTensorMagic)) throw FormatError("tensor record: bad magic");
  const auto code = io::read_u8(is);
  const auto rank = io::read_u32(is);
  if (rank > 8) throw FormatError("tensor record: implausible rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = io::read_u64(is);
    if (d > (std::size_t{1} << 32)) throw FormatError("tensor record: implausible extent");
    count *= d;
  }
  if (count > (std::size_t{1} << 32)) throw FormatError("tensor record: implausible element count");
  std::vector<T> values(count);
  if (code == static_cast<std::uint8_t>(DType::f32)) {
    auto v = read_elements<float, std::uint32_t>(is, count);
    std::copy(v.begin(), v.end(), values.begin());
  } else if (code == static_cast<std::uint8_t>(DType::f64)) {
    auto v = read_elements<double, std::uint64_t>(is, count);
    std::transform(v.begin(), v.end(), values.begin(), [](double x) { return static_cast<T>(x); });
  } else {
    throw FormatError("tensor record: unknown dtype code " + std::to_string(code));
  }
  return Tensor<T>(std::move(shape), std::move(values));
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);

}  // namespace mssf
