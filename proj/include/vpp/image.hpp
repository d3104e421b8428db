// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>
#include <png.h>

#include "vpp/domain.hpp"

namespace vpp {

/// 8-bit interleaved raster. channels is 1 (gray), 3 (RGB) or 4 (RGBA).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {
    if (w <= 0 || h <= 0) throw ContractError("image dimensions must be positive");
    if (c != 1 && c != 3 && c != 4) throw ContractError("image must have 1, 3 or 4 channels");
  }

  std::uint8_t* px(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                               static_cast<std::size_t>(channels);
  }
  const std::uint8_t* px(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                               static_cast<std::size_t>(channels);
  }

  friend bool operator==(const Image&, const Image&) = default;
};

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Hashing and base64 (OpenSSL)
// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string sha256_hex(std::string_view s) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline Bytes base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char ch : text) {
    if (ch != '\n' && ch != '\r' && ch != ' ' && ch != '\t') clean.push_back(ch);
  }
  if (clean.size() % 4 != 0) throw ContractError("base64 input length is not a multiple of 4");
  if (clean.empty()) return {};
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw ContractError("malformed base64 input");
  std::size_t pad = 0;
  if (clean.back() == '=') ++pad;
  if (clean.size() >= 2 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

/// Digest of the decoded raster (dimensions + pixels), independent of codec.
inline std::string pixel_digest(const Image& img) {
  Bytes buf(12);
  const std::uint32_t dims[3] = {static_cast<std::uint32_t>(img.width), static_cast<std::uint32_t>(img.height),
                                 static_cast<std::uint32_t>(img.channels)};
  std::memcpy(buf.data(), dims, sizeof dims);
  buf.insert(buf.end(), img.pixels.begin(), img.pixels.end());
  return sha256_hex(buf);
}

// ---------------------------------------------------------------------------
// PNG codec (libpng simplified API)
// ---------------------------------------------------------------------------

inline png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw ContractError("unsupported channel count");
  }
}

inline Bytes encode_png(const Image& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) *
                               static_cast<std::size_t>(img.channels)) {
    throw ContractError("image pixel buffer does not match its dimensions");
  }
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = png_format_for(img.channels);

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + desc.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + desc.message);
  }
  out.resize(size);
  return out;
}

inline Image decode_png(std::span<const std::uint8_t> data) {
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, data.data(), data.size())) {
    throw ContractError(std::string("png decode failed: ") + desc.message);
  }
  int channels = 3;
  if (desc.format & PNG_FORMAT_FLAG_ALPHA) {
    channels = 4;
  } else if (!(desc.format & PNG_FORMAT_FLAG_COLOR)) {
    channels = 1;
  }
  desc.format = png_format_for(channels);
  Image img(static_cast<int>(desc.width), static_cast<int>(desc.height), channels);
  if (!png_image_finish_read(&desc, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&desc);
    throw ContractError(std::string("png decode failed: ") + desc.message);
  }
  return img;
}

// ---------------------------------------------------------------------------
// Masks as images: single channel, 0 outside, 255 inside
// ---------------------------------------------------------------------------

inline Image mask_to_image(const BinaryMask& mask) {
  Image img(mask.width(), mask.height(), 1);
  auto bits = mask.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) img.pixels[i] = bits[i] ? 255 : 0;
  return img;
}

/// Binarizes channel 0 at 128.
inline BinaryMask image_to_mask(const Image& img) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = img.pixels[i * static_cast<std::size_t>(img.channels)] >= 128 ? 1 : 0;
  }
  return BinaryMask(img.width, img.height, std::move(bits));
}

inline Bytes encode_mask_png(const BinaryMask& mask) { return encode_png(mask_to_image(mask)); }
inline BinaryMask decode_mask_png(std::span<const std::uint8_t> data) { return image_to_mask(decode_png(data)); }

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

inline void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Image load_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

}  // namespace vpp
