// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Model-capability interfaces consumed by the pipeline and deterministic
// stub implementations for GPU-free runs.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>

#include "vpp/domain.hpp"
#include "vpp/image.hpp"

namespace vpp {

// ---------------------------------------------------------------------------
// Failures
// ---------------------------------------------------------------------------

enum class ProviderFailure { timeout, status, malformed, transport, backend };

inline const char* to_string(ProviderFailure f) {
  switch (f) {
    case ProviderFailure::timeout: return "timeout";
    case ProviderFailure::status: return "status";
    case ProviderFailure::malformed: return "malformed";
    case ProviderFailure::transport: return "transport";
    case ProviderFailure::backend: return "backend";
  }
  return "unknown";
}

/// Infrastructure failure of a model backend. Aborts a run; never retried by
/// the generation loop.
class ProviderError : public Error {
 public:
  ProviderError(ProviderFailure kind, int attempts, std::string message, std::string stage = {})
      : Error(format(kind, attempts, message, stage)), kind_(kind), attempts_(attempts),
        detail_(std::move(message)), stage_(std::move(stage)) {}

  ProviderFailure kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  ProviderError with_stage(std::string stage) const { return ProviderError(kind_, attempts_, detail_, std::move(stage)); }

 private:
  static std::string format(ProviderFailure kind, int attempts, const std::string& msg, const std::string& stage) {
    std::string out = "provider failure (";
    out += to_string(kind);
    out += ", " + std::to_string(attempts) + " attempt" + (attempts == 1 ? "" : "s") + ")";
    if (!stage.empty()) out += " in " + stage + " stage";
    if (!msg.empty()) out += ": " + msg;
    return out;
  }

  ProviderFailure kind_;
  int attempts_;
  std::string detail_;
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Interfaces
// ---------------------------------------------------------------------------

/// Implementations that are not safe for concurrent calls return false from
/// concurrent_safe(); Providers then serializes calls to them.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed_image(const Image& image) = 0;
  virtual Embedding embed_text(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
  virtual bool concurrent_safe() const { return true; }
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual Heatmap heatmap(const Image& image, std::string_view label) = 0;
  virtual bool concurrent_safe() const { return true; }
};

class VisualQA {
 public:
  virtual ~VisualQA() = default;
  virtual std::string answer(const Image& image, std::string_view question) = 0;
  virtual bool concurrent_safe() const { return true; }
};

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string caption(const Image& image) = 0;
  virtual bool concurrent_safe() const { return true; }
};

class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual Image inpaint(const Image& background, const BinaryMask& mask, std::string_view prompt,
                        std::uint64_t seed) = 0;
  virtual bool concurrent_safe() const { return true; }
};

/// The five capabilities used by one pipeline, with a call gate per provider.
class Providers {
 public:
  Providers() = default;
  Providers(std::shared_ptr<Embedder> embedder, std::shared_ptr<Segmenter> segmenter, std::shared_ptr<VisualQA> vqa,
            std::shared_ptr<Captioner> captioner, std::shared_ptr<Inpainter> inpainter)
      : embedder_(std::move(embedder)), segmenter_(std::move(segmenter)), vqa_(std::move(vqa)),
        captioner_(std::move(captioner)), inpainter_(std::move(inpainter)) {}

 private:
  template <typename P, typename F>
  static auto gated(P& provider, std::mutex& gate, F&& fn) -> decltype(fn(provider)) {
    if (provider.concurrent_safe()) return fn(provider);
    std::lock_guard lock(gate);
    return fn(provider);
  }

 public:

  Embedding embed_image(const Image& image) const {
    return gated(*embedder_, gates_->embedder, [&](Embedder& e) { return e.embed_image(image); });
  }
  Embedding embed_text(std::string_view text) const {
    return gated(*embedder_, gates_->embedder, [&](Embedder& e) { return e.embed_text(text); });
  }
  Heatmap heatmap(const Image& image, std::string_view label) const {
    return gated(*segmenter_, gates_->segmenter, [&](Segmenter& s) { return s.heatmap(image, label); });
  }
  std::string answer(const Image& image, std::string_view question) const {
    return gated(*vqa_, gates_->vqa, [&](VisualQA& q) { return q.answer(image, question); });
  }
  std::string caption(const Image& image) const {
    return gated(*captioner_, gates_->captioner, [&](Captioner& c) { return c.caption(image); });
  }
  Image inpaint(const Image& background, const BinaryMask& mask, std::string_view prompt, std::uint64_t seed) const {
    return gated(*inpainter_, gates_->inpainter,
                 [&](Inpainter& p) { return p.inpaint(background, mask, prompt, seed); });
  }

  Embedder& embedder() const { return *embedder_; }
  Segmenter& segmenter() const { return *segmenter_; }
  VisualQA& vqa() const { return *vqa_; }
  Captioner& captioner() const { return *captioner_; }
  Inpainter& inpainter() const { return *inpainter_; }

 private:
  struct Gates {
    std::mutex embedder, segmenter, vqa, captioner, inpainter;
  };

  std::shared_ptr<Embedder> embedder_;
  std::shared_ptr<Segmenter> segmenter_;
  std::shared_ptr<VisualQA> vqa_;
  std::shared_ptr<Captioner> captioner_;
  std::shared_ptr<Inpainter> inpainter_;
  std::shared_ptr<Gates> gates_ = std::make_shared<Gates>();
};

// ---------------------------------------------------------------------------
// Deterministic helpers
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0,1) from the top 53 bits; identical on every platform
/// (std::uniform_real_distribution is not).
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller over unit_uniform.
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Unit vector drawn from an isotropic Gaussian seeded by `key`.
inline Embedding hashed_unit_vector(std::string_view key, std::size_t dim) {
  std::mt19937_64 rng(splitmix64(fnv1a64(key)));
  Embedding v(dim);
  for (;;) {
    for (double& x : v) x = standard_normal(rng);
    if (l2_norm(v) > 0.0) return normalized(v);
  }
}

// ---------------------------------------------------------------------------
// Stubs
// ---------------------------------------------------------------------------

/// Embedder serving fixed vectors from lookup tables. Text keys are the text
/// itself; image keys are pixel_digest() values. Unknown keys map to a
/// hash-seeded unit vector, so the stub is total.
class TableEmbedder : public Embedder {
 public:
  using Table = std::map<std::string, Embedding, std::less<>>;

  TableEmbedder(const Table& text_table, const Table& image_table, std::size_t dimension = 0) : dim_(dimension) {
    for (const auto* table : {&text_table, &image_table}) {
      for (const auto& [key, vec] : *table) {
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_) throw ContractError("table vectors must share one dimension");
        if (!(l2_norm(vec) > 0.0)) throw ContractError("table vector for '" + key + "' has zero norm");
      }
    }
    if (dim_ == 0) throw ContractError("embedder dimension must be positive");
    for (const auto& [k, v] : text_table) text_.emplace(k, normalized(v));
    for (const auto& [k, v] : image_table) images_.emplace(k, normalized(v));
  }

  Embedding embed_text(std::string_view text) override {
    std::shared_lock lock(mu_);
    if (auto it = text_.find(text); it != text_.end()) return it->second;
    return hashed_unit_vector(std::string("text:").append(text), dim_);
  }

  Embedding embed_image(const Image& image) override { return embed_image_key(pixel_digest(image)); }

  Embedding embed_image_key(std::string_view digest) {
    std::shared_lock lock(mu_);
    if (auto it = images_.find(digest); it != images_.end()) return it->second;
    return hashed_unit_vector(std::string("image:").append(digest), dim_);
  }

  void put_image(std::string digest, const Embedding& v) {
    if (v.size() != dim_) throw ContractError("image vector has wrong dimension");
    auto n = normalized(v);
    std::unique_lock lock(mu_);
    images_[std::move(digest)] = std::move(n);
  }

  void put_text(std::string text, const Embedding& v) {
    if (v.size() != dim_) throw ContractError("text vector has wrong dimension");
    auto n = normalized(v);
    std::unique_lock lock(mu_);
    text_[std::move(text)] = std::move(n);
  }

  std::size_t dimension() const override { return dim_; }

 private:
  std::size_t dim_;
  mutable std::shared_mutex mu_;
  Table text_;
  Table images_;
};

inline std::shared_ptr<TableEmbedder> stub_embedder_from_table(const TableEmbedder::Table& text_table,
                                                               const TableEmbedder::Table& image_table,
                                                               std::size_t dimension = 0) {
  return std::make_shared<TableEmbedder>(text_table, image_table, dimension);
}

using HeatmapFn = std::function<double(int x, int y, int width, int height)>;

class StubSegmenter : public Segmenter {
 public:
  explicit StubSegmenter(HeatmapFn fn) : fn_(std::move(fn)) {}

  Heatmap heatmap(const Image& image, std::string_view) override {
    Heatmap h{image.width, image.height, {}};
    h.scores.resize(static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        h.scores[static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width) + static_cast<std::size_t>(x)] =
            fn_(x, y, image.width, image.height);
      }
    }
    h.validate();
    return h;
  }

 private:
  HeatmapFn fn_;
};

/// Scores `inside` on the pixel rectangle [x, x+w) x [y, y+h), `outside` elsewhere.
inline HeatmapFn block_heatmap(int x, int y, int w, int h, double inside, double outside) {
  return [=](int px, int py, int, int) { return px >= x && px < x + w && py >= y && py < y + h ? inside : outside; };
}

inline HeatmapFn uniform_heatmap(double value) {
  return [=](int, int, int, int) { return value; };
}

class StubVisualQA : public VisualQA {
 public:
  explicit StubVisualQA(std::string answer) : answer_(std::move(answer)) {}
  std::string answer(const Image&, std::string_view) override { return answer_; }

 private:
  std::string answer_;
};

class StubCaptioner : public Captioner {
 public:
  explicit StubCaptioner(std::string caption) : caption_(std::move(caption)) {}
  std::string caption(const Image&) override { return caption_; }

 private:
  std::string caption_;
};

/// Copies the background and fills masked pixels with noise derived from
/// (prompt, seed, x, y). Output is a pure function of its inputs.
class StubInpainter : public Inpainter {
 public:
  Image inpaint(const Image& background, const BinaryMask& mask, std::string_view prompt,
                std::uint64_t seed) override {
    if (mask.width() != background.width || mask.height() != background.height) {
      throw ContractError("mask dimensions must match the background");
    }
    Image out = background;
    const std::uint64_t base = splitmix64(fnv1a64(prompt) ^ splitmix64(seed));
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        if (!mask.at(x, y)) continue;
        std::uint64_t v = splitmix64(base ^ (static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x)));
        auto* p = out.px(x, y);
        const int colour = out.channels == 4 ? 3 : out.channels;
        for (int c = 0; c < colour; ++c) {
          p[c] = static_cast<std::uint8_t>(v >> (8 * c));
        }
      }
    }
    return out;
  }
};

}  // namespace vpp
