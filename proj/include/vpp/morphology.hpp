// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Binary erosion/dilation with a centered square structuring element.
// Pixels outside the image are treated as false for both operators.
//
// A k x k square is separable, so each iteration runs as a horizontal pass
// followed by a vertical pass, each using a running window count. Cost is
// O(width * height) per iteration regardless of k.

#pragma once

#include <vector>

#include "vpp/domain.hpp"

namespace vpp {

/// Raised when erosion removes every pixel of a mask during size feedback.
class AdjustmentCollapse : public Error {
 public:
  using Error::Error;
};

namespace detail {

enum class MorphOp { erode, dilate };

// One separable pass over `len` samples spaced `stride` apart.
inline void morph_line(const std::uint8_t* src, std::uint8_t* dst, int len, std::ptrdiff_t stride, int half,
                       MorphOp op, std::vector<int>& prefix) {
  prefix.assign(static_cast<std::size_t>(len) + 1, 0);
  for (int i = 0; i < len; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + (src[i * stride] ? 1 : 0);
  const int full = 2 * half + 1;
  for (int i = 0; i < len; ++i) {
    const int lo = i - half;
    const int hi = i + half;
    if (op == MorphOp::erode) {
      // Any window sample outside the line counts as false.
      if (lo < 0 || hi >= len) {
        dst[i * stride] = 0;
      } else {
        dst[i * stride] = (prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)]) == full ? 1 : 0;
      }
    } else {
      const int a = lo < 0 ? 0 : lo;
      const int b = hi >= len ? len - 1 : hi;
      dst[i * stride] = (prefix[static_cast<std::size_t>(b) + 1] - prefix[static_cast<std::size_t>(a)]) > 0 ? 1 : 0;
    }
  }
}

inline BinaryMask morph(const BinaryMask& mask, int kernel_size, int iterations, MorphOp op) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ContractError("kernel_size must be odd and >= 1");
  if (iterations < 0) throw ContractError("iterations must be >= 0");
  const int w = mask.width();
  const int h = mask.height();
  if (iterations == 0 || kernel_size == 1 || w == 0 || h == 0) return mask;

  const int half = kernel_size / 2;
  std::vector<std::uint8_t> cur(mask.bits().begin(), mask.bits().end());
  std::vector<std::uint8_t> tmp(cur.size());
  std::vector<int> prefix;
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
      morph_line(cur.data() + row, tmp.data() + row, w, 1, half, op, prefix);
    }
    for (int x = 0; x < w; ++x) {
      morph_line(tmp.data() + x, cur.data() + x, h, w, half, op, prefix);
    }
  }
  return BinaryMask(w, h, std::move(cur));
}

}  // namespace detail

inline BinaryMask erode(const BinaryMask& mask, int kernel_size, int iterations) {
  return detail::morph(mask, kernel_size, iterations, detail::MorphOp::erode);
}

inline BinaryMask dilate(const BinaryMask& mask, int kernel_size, int iterations) {
  return detail::morph(mask, kernel_size, iterations, detail::MorphOp::dilate);
}

inline double area_fraction(const BinaryMask& mask) {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(mask.area()) / static_cast<double>(mask.size());
}

/// Erosion then dilation with the iteration counts in `params`.
inline BinaryMask apply_morph(const BinaryMask& mask, const MorphParams& params) {
  validate_morph(params);
  return dilate(erode(mask, params.kernel_size, params.erosion_iterations), params.kernel_size,
                params.dilation_iterations);
}

/// Size feedback: shrink an oversized product's mask, grow an undersized one.
inline BinaryMask adjust_for_verdict(const BinaryMask& mask, VolumeVerdict verdict, const MorphParams& params) {
  validate_morph(params);
  switch (verdict) {
    case VolumeVerdict::appropriate:
      return mask;
    case VolumeVerdict::too_small:
      return dilate(mask, params.kernel_size, params.step_per_adjust);
    case VolumeVerdict::too_large: {
      auto out = erode(mask, params.kernel_size, params.step_per_adjust);
      if (out.area() == 0) throw AdjustmentCollapse("erosion removed the entire mask");
      return out;
    }
  }
  throw ContractError("unknown volume verdict");
}

}  // namespace vpp
