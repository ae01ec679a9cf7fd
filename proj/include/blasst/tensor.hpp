// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace blasst {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

using Shape = std::vector<std::uint64_t>;

/// Dense row-major array with an explicit shape. Rank is at least 1 and every
/// extent is positive.
class Tensor {
 public:
  Tensor(Shape shape, std::vector<float> data);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape, DType dtype);

  DType dtype() const noexcept;
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::uint64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::uint64_t numel() const noexcept;

  // Typed views; throw ErrorKind::validation on a dtype mismatch.
  std::span<const float> f32() const;
  std::span<const double> f64() const;
  std::span<float> f32_mut();
  std::span<double> f64_mut();

  std::vector<float> to_f32() const;
  std::vector<double> to_f64() const;

  std::size_t count_nonfinite() const;

  // Same dtype, shape, and identical payload bytes.
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::variant<std::vector<float>, std::vector<double>> data_;
};

std::uint64_t shape_numel(const Shape& shape);

// "BTSR" binary format: magic, u32 version = 1, u8 dtype, u8 rank,
// u16 reserved = 0, rank x u64 extents, row-major payload. Little-endian.
inline constexpr char kTensorMagic[4] = {'B', 'T', 'S', 'R'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 12;

std::vector<std::byte> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::byte> bytes, const std::string& origin);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace blasst
