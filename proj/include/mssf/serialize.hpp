// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "mssf/tensor.hpp"

namespace mssf {

/// Little-endian primitive I/O shared by the tensor and checkpoint formats.
/// Short reads throw FormatError.
namespace io {

void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_bytes(std::ostream& os, const void* data, std::size_t n);
/// u32 length prefix followed by the raw bytes.
void write_string(std::ostream& os, const std::string& s);

std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
void read_bytes(std::istream& is, void* data, std::size_t n);
std::string read_string(std::istream& is, std::size_t max_len = 1u << 20);

}  // namespace io

/// Tensor record: magic "TNSR", u8 dtype code (1 = f32, 2 = f64), u32 rank,
/// rank x u64 extents, then the little-endian element buffer.
template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t);

/// Reads a record of either dtype and converts to T.
template <typename T>
Tensor<T> read_tensor(std::istream& is);

}  // namespace mssf
