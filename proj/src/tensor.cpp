// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "blasst/error.hpp"

namespace blasst {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::length: return "length";
    case ErrorKind::unsupported_dtype: return "unsupported_dtype";
    case ErrorKind::validation: return "validation";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::calibration_failed: return "calibration_failed";
    case ErrorKind::model: return "model";
  }
  return "unknown";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) {
    throw Error(ErrorKind::validation, "tensor rank must be >= 1 (0-dim scalars are not supported)");
  }
  if (shape.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw Error(ErrorKind::validation, "tensor rank exceeds 255");
  }
  for (auto e : shape) {
    if (e == 0) throw Error(ErrorKind::validation, "tensor extents must be positive");
  }
}

std::size_t element_size(DType d) { return d == DType::f32 ? 4 : 8; }

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(const std::byte* p) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
  }
  return bits;
}

}  // namespace

std::uint64_t shape_numel(const Shape& shape) {
  std::uint64_t n = 1;
  for (auto e : shape) {
    if (e != 0 && n > std::numeric_limits<std::uint64_t>::max() / e) {
      throw Error(ErrorKind::validation, "tensor element count overflows u64");
    }
    n *= e;
  }
  return n;
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_numel(shape_) != std::get<0>(data_).size()) {
    throw Error(ErrorKind::validation, "tensor data length does not match shape");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_numel(shape_) != std::get<1>(data_).size()) {
    throw Error(ErrorKind::validation, "tensor data length does not match shape");
  }
}

Tensor Tensor::zeros(Shape shape, DType dtype) {
  check_shape(shape);
  auto n = static_cast<std::size_t>(shape_numel(shape));
  if (dtype == DType::f32) return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

DType Tensor::dtype() const noexcept { return data_.index() == 0 ? DType::f32 : DType::f64; }

std::uint64_t Tensor::numel() const noexcept {
  return std::visit([](const auto& d) { return static_cast<std::uint64_t>(d.size()); }, data_);
}

std::span<const float> Tensor::f32() const {
  if (auto* d = std::get_if<0>(&data_)) return *d;
  throw Error(ErrorKind::validation, "tensor is f64, f32 view requested");
}

std::span<const double> Tensor::f64() const {
  if (auto* d = std::get_if<1>(&data_)) return *d;
  throw Error(ErrorKind::validation, "tensor is f32, f64 view requested");
}

std::span<float> Tensor::f32_mut() {
  if (auto* d = std::get_if<0>(&data_)) return *d;
  throw Error(ErrorKind::validation, "tensor is f64, f32 view requested");
}

std::span<double> Tensor::f64_mut() {
  if (auto* d = std::get_if<1>(&data_)) return *d;
  throw Error(ErrorKind::validation, "tensor is f32, f64 view requested");
}

std::vector<float> Tensor::to_f32() const {
  return std::visit([](const auto& d) { return std::vector<float>(d.begin(), d.end()); }, data_);
}

std::vector<double> Tensor::to_f64() const {
  return std::visit([](const auto& d) { return std::vector<double>(d.begin(), d.end()); }, data_);
}

std::size_t Tensor::count_nonfinite() const {
  return std::visit(
      [](const auto& d) {
        std::size_t n = 0;
        for (auto x : d) n += std::isfinite(x) ? 0 : 1;
        return n;
      },
      data_);
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (dtype() != other.dtype() || shape_ != other.shape_) return false;
  return std::visit(
      [&](const auto& d) {
        using V = std::decay_t<decltype(d)>;
        const auto& o = std::get<V>(other.data_);
        return std::memcmp(d.data(), o.data(), d.size() * sizeof(typename V::value_type)) == 0;
      },
      data_);
}

std::vector<std::byte> encode_tensor(const Tensor& t) {
  std::vector<std::byte> out;
  out.reserve(kTensorHeaderBytes + 8 * t.rank() + t.numel() * element_size(t.dtype()));
  for (char c : kTensorMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  put_le<std::uint16_t>(out, 0);
  for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
  if (t.dtype() == DType::f32) {
    for (float x : t.f32()) put_le<float>(out, x);
  } else {
    for (double x : t.f64()) put_le<double>(out, x);
  }
  return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes, const std::string& origin) {
  if (bytes.size() < kTensorHeaderBytes) {
    throw Error(ErrorKind::length, origin + ": file shorter than the 12-byte header");
  }
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0) {
    std::string magic;
    for (int i = 0; i < 4; ++i) {
      auto c = std::to_integer<unsigned char>(bytes[i]);
      magic += (c >= 32 && c < 127) ? static_cast<char>(c) : '?';
    }
    throw Error(ErrorKind::format, origin + ": bad magic \"" + magic + "\" (expected \"BTSR\")");
  }
  auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kTensorFormatVersion) {
    throw Error(ErrorKind::format, origin + ": unsupported format version " + std::to_string(version));
  }
  auto dtype_code = std::to_integer<std::uint8_t>(bytes[8]);
  if (dtype_code > 1) {
    throw Error(ErrorKind::unsupported_dtype,
                origin + ": unsupported dtype code " + std::to_string(dtype_code));
  }
  auto rank = std::to_integer<std::uint8_t>(bytes[9]);
  auto reserved = get_le<std::uint16_t>(bytes.data() + 10);
  if (reserved != 0) throw Error(ErrorKind::format, origin + ": reserved header field is non-zero");
  if (rank == 0) throw Error(ErrorKind::format, origin + ": rank 0 is not allowed");
  std::size_t dims_end = kTensorHeaderBytes + 8 * std::size_t{rank};
  if (bytes.size() < dims_end) {
    throw Error(ErrorKind::length, origin + ": truncated extent list");
  }
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = get_le<std::uint64_t>(bytes.data() + kTensorHeaderBytes + 8 * i);
    if (shape[i] == 0) throw Error(ErrorKind::format, origin + ": zero extent in header");
  }
  auto dtype = static_cast<DType>(dtype_code);
  std::uint64_t n = shape_numel(shape);
  std::uint64_t payload = bytes.size() - dims_end;
  std::uint64_t esize = element_size(dtype);
  if (n > std::numeric_limits<std::uint64_t>::max() / esize || payload != n * esize) {
    std::ostringstream msg;
    msg << origin << ": header declares " << n << " elements but payload holds "
        << payload / esize << (payload % esize ? " and a partial element" : "");
    throw Error(ErrorKind::length, msg.str());
  }
  const std::byte* p = bytes.data() + dims_end;
  if (dtype == DType::f32) {
    std::vector<float> data(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < data.size(); ++i) {
      data[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
    }
    return Tensor(std::move(shape), std::move(data));
  }
  std::vector<double> data(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string() + " for reading");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::io, "read failed for " + path.string());
  auto* first = reinterpret_cast<const std::byte*>(raw.data());
  return decode_tensor(std::span<const std::byte>(first, raw.size()), path.string());
}

}  // namespace blasst
