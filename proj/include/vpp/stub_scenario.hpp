// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Scripted stub world. A StubScenario lists, per generation attempt, the
// similarities the cascade should observe: (refined caption, raw caption),
// centroid cosine, and the three size-prompt similarities. The world turns
// those numbers into actual embedding geometry so the real gate code runs
// unmodified on top of it.
//
// Geometry: e0 is the product direction (every sample image embeds to e0, so
// the registered centroid is e0). Each anchor text i embeds to
//   t_i = beta * e0 + gamma * e_i,    gamma = sqrt(1 - beta^2)
// and a generated image for an attempt with centroid cosine q and anchor
// similarities s_i embeds to
//   v = q * e0 + sum_i x_i * e_i + r * e_res,   x_i = (s_i - beta * q) / gamma
// with r chosen to make |v| = 1. beta is shared by all anchors and picked to
// maximize the smallest r^2 over the scenario; a negative optimum means the
// scripted numbers cannot coexist in any embedding space of this shape.

#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vpp/alignment.hpp"
#include "vpp/domain.hpp"
#include "vpp/providers.hpp"

namespace vpp {

class ScenarioError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct ScriptedAttempt {
  std::array<double, 2> content{0.30, 0.25};  // (refined caption, raw caption)
  double quality = 0.85;
  std::array<double, 3> volume{0.29, 0.31, 0.28};  // (too small, appropriate, too large)
  std::optional<std::string> caption;
};

struct HeatmapSpec {
  enum class Kind { block, block_fraction, uniform };
  Kind kind = Kind::block_fraction;
  std::array<double, 4> rect{0.25, 0.5, 0.5, 0.4};  // x, y, w, h
  double inside = 0.9;
  double outside = 0.1;
  double value = 0.5;

  HeatmapFn function() const {
    switch (kind) {
      case Kind::uniform:
        return uniform_heatmap(value);
      case Kind::block:
        return block_heatmap(static_cast<int>(rect[0]), static_cast<int>(rect[1]), static_cast<int>(rect[2]),
                             static_cast<int>(rect[3]), inside, outside);
      case Kind::block_fraction:
        break;
    }
    const auto r = rect;
    const double in = inside;
    const double out = outside;
    return [r, in, out](int x, int y, int w, int h) {
      const double fx = (x + 0.5) / w;
      const double fy = (y + 0.5) / h;
      return fx >= r[0] && fx < r[0] + r[2] && fy >= r[1] && fy < r[1] + r[3] ? in : out;
    };
  }
};

NLOHMANN_JSON_SERIALIZE_ENUM(HeatmapSpec::Kind, {{HeatmapSpec::Kind::block, "block"},
                                                 {HeatmapSpec::Kind::block_fraction, "block_fraction"},
                                                 {HeatmapSpec::Kind::uniform, "uniform"}})

struct StubScenario {
  std::string vqa_answer = "countertop";
  std::string caption = "a kitchen with a countertop";
  HeatmapSpec heatmap;
  /// Entry i applies to the attempt whose seed is first_seed + i.
  std::vector<ScriptedAttempt> attempts{ScriptedAttempt{}};
  /// Explicit per-seed entries, taking precedence over `attempts`.
  std::map<std::uint64_t, ScriptedAttempt> by_seed;
  /// Past the end of `attempts`: repeat the last entry, or wrap around.
  bool cycle = false;
  std::size_t dimension = 64;

  void validate() const {
    std::vector<std::string> v;
    if (vqa_answer.empty()) v.emplace_back("vqa_answer: must be non-empty");
    if (caption.empty()) v.emplace_back("caption: must be non-empty");
    if (attempts.empty()) v.emplace_back("attempts: at least one scripted attempt is required");
    auto check = [&v](const ScriptedAttempt& a, const std::string& where) {
      auto in_range = [](double x) { return x >= -1.0 && x <= 1.0; };
      if (!in_range(a.content[0]) || !in_range(a.content[1])) v.push_back(where + ".content: cosine outside [-1,1]");
      if (!in_range(a.quality)) v.push_back(where + ".quality: cosine outside [-1,1]");
      for (double s : a.volume) {
        if (!in_range(s)) v.push_back(where + ".volume: cosine outside [-1,1]");
      }
      if (a.caption && a.caption->empty()) v.push_back(where + ".caption: must be non-empty");
    };
    for (std::size_t i = 0; i < attempts.size(); ++i) check(attempts[i], "attempts[" + std::to_string(i) + "]");
    for (const auto& [seed, a] : by_seed) check(a, "seeds[" + std::to_string(seed) + "]");
    if (heatmap.kind == HeatmapSpec::Kind::uniform && !(heatmap.value >= 0.0 && heatmap.value <= 1.0)) {
      v.emplace_back("heatmap.value: outside [0,1]");
    }
    if (!(heatmap.inside >= 0.0 && heatmap.inside <= 1.0) || !(heatmap.outside >= 0.0 && heatmap.outside <= 1.0)) {
      v.emplace_back("heatmap: scores outside [0,1]");
    }
    if (dimension < 8) v.emplace_back("dimension: must be >= 8");
    if (!v.empty()) throw ConfigError(std::move(v));
  }

  const ScriptedAttempt& entry_for(std::uint64_t seed, std::uint64_t first_seed) const {
    if (auto it = by_seed.find(seed); it != by_seed.end()) return it->second;
    const std::uint64_t offset = seed >= first_seed ? seed - first_seed : 0;
    if (cycle) return attempts[offset % attempts.size()];
    return attempts[std::min<std::uint64_t>(offset, attempts.size() - 1)];
  }
};

inline void to_json(json& j, const ScriptedAttempt& a) {
  j = json{{"content", a.content}, {"quality", a.quality}, {"volume", a.volume}};
  detail::put_opt(j, "caption", a.caption);
}

inline void from_json(const json& j, ScriptedAttempt& a) {
  a = ScriptedAttempt{};
  detail::get_to_if(j, "content", a.content);
  detail::get_to_if(j, "quality", a.quality);
  detail::get_to_if(j, "volume", a.volume);
  a.caption = detail::get_opt<std::string>(j, "caption");
}

inline void to_json(json& j, const HeatmapSpec& h) {
  j = json{{"kind", h.kind}};
  if (h.kind == HeatmapSpec::Kind::uniform) {
    j["value"] = h.value;
  } else {
    j["rect"] = h.rect;
    j["inside"] = h.inside;
    j["outside"] = h.outside;
  }
}

inline void from_json(const json& j, HeatmapSpec& h) {
  h = HeatmapSpec{};
  detail::get_to_if(j, "kind", h.kind);
  detail::get_to_if(j, "rect", h.rect);
  detail::get_to_if(j, "inside", h.inside);
  detail::get_to_if(j, "outside", h.outside);
  detail::get_to_if(j, "value", h.value);
}

inline void to_json(json& j, const StubScenario& s) {
  j = json{{"vqa_answer", s.vqa_answer}, {"caption", s.caption},   {"heatmap", s.heatmap},
           {"attempts", s.attempts},     {"cycle", s.cycle},       {"dimension", s.dimension}};
  if (!s.by_seed.empty()) {
    json seeds = json::object();
    for (const auto& [seed, a] : s.by_seed) seeds[std::to_string(seed)] = a;
    j["seeds"] = std::move(seeds);
  }
}

inline void from_json(const json& j, StubScenario& s) {
  s = StubScenario{};
  detail::get_to_if(j, "vqa_answer", s.vqa_answer);
  detail::get_to_if(j, "caption", s.caption);
  detail::get_to_if(j, "heatmap", s.heatmap);
  detail::get_to_if(j, "attempts", s.attempts);
  detail::get_to_if(j, "cycle", s.cycle);
  detail::get_to_if(j, "dimension", s.dimension);
  if (auto it = j.find("seeds"); it != j.end()) {
    for (const auto& [key, value] : it->items()) s.by_seed.emplace(std::stoull(key), value.get<ScriptedAttempt>());
  }
}

// Ready-made scenarios.
namespace scenarios {

inline ScriptedAttempt passing() { return ScriptedAttempt{}; }

/// Product absent: the refined caption is no more likely than the raw one.
inline ScriptedAttempt content_fail() {
  ScriptedAttempt a;
  a.content = {0.25, 0.25};
  return a;
}

inline ScriptedAttempt quality_fail() {
  ScriptedAttempt a;
  a.quality = 0.40;
  return a;
}

inline ScriptedAttempt volume_fail(VolumeVerdict verdict = VolumeVerdict::too_large) {
  ScriptedAttempt a;
  a.volume = verdict == VolumeVerdict::too_small ? std::array<double, 3>{0.35, 0.30, 0.30}
                                                 : std::array<double, 3>{0.30, 0.30, 0.35};
  return a;
}

inline StubScenario all_pass() { return StubScenario{}; }

inline StubScenario all_fail() {
  StubScenario s;
  s.attempts = {content_fail()};
  return s;
}

/// `failures` content failures, then a pass.
inline StubScenario fail_then_pass(int failures) {
  StubScenario s;
  s.attempts.assign(static_cast<std::size_t>(failures), content_fail());
  s.attempts.push_back(passing());
  return s;
}

}  // namespace scenarios

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

class ScenarioWorld : public std::enable_shared_from_this<ScenarioWorld> {
 public:
  ScenarioWorld(StubScenario scenario, const ProductProfile& profile, const SizePromptSet& prompts = {})
      : scenario_(std::move(scenario)) {
    scenario_.validate();
    build_roles(profile, prompts);
    solve_geometry();
  }

  const StubScenario& scenario() const noexcept { return scenario_; }
  std::size_t dimension() const noexcept { return scenario_.dimension; }
  double beta() const noexcept { return beta_; }

  /// Embedding every non-generated image maps to; the registered centroid.
  const Embedding& product_direction() const noexcept { return product_dir_; }

  Embedding text_vector(std::string_view text) const {
    if (auto it = anchor_index_.find(std::string(text)); it != anchor_index_.end()) return anchor_vectors_[it->second];
    return hashed_unit_vector(std::string("text:").append(text), dimension());
  }

  Embedding image_vector(const Image& image) const {
    const auto entry = lookup(pixel_digest(image));
    if (!entry) return product_dir_;
    return attempt_vector(*entry);
  }

  std::string caption_for(const Image& image) const {
    const auto entry = lookup(pixel_digest(image));
    if (entry && entry->caption) return *entry->caption;
    return scenario_.caption;
  }

  /// Records a generated image so later embed/caption calls resolve to the
  /// scripted entry for `seed`.
  void register_generated(const Image& image, std::uint64_t seed) {
    std::lock_guard lock(mu_);
    if (!first_seed_) first_seed_ = seed;
    generated_[pixel_digest(image)] = scenario_.entry_for(seed, *first_seed_);
  }

  Embedding attempt_vector(const ScriptedAttempt& a) const {
    const auto req = requirements(a);
    const double gamma = std::sqrt(1.0 - beta_ * beta_);
    Embedding v(dimension(), 0.0);
    v[0] = a.quality;
    double sq = a.quality * a.quality;
    for (const auto& [idx, sim] : req) {
      const double x = (sim - beta_ * a.quality) / gamma;
      v[idx + 1] = x;
      sq += x * x;
    }
    v[residual_axis()] = std::sqrt(std::max(0.0, 1.0 - sq));
    return normalized(v);
  }

 private:
  std::size_t residual_axis() const { return anchor_vectors_.size() + 1; }

  std::size_t anchor(const std::string& text) {
    auto [it, inserted] = anchor_index_.emplace(text, anchor_texts_.size());
    if (inserted) anchor_texts_.push_back(text);
    return it->second;
  }

  void build_roles(const ProductProfile& profile, const SizePromptSet& prompts) {
    auto add_caption_roles = [&](const std::string& caption) {
      refined_anchor_[caption] = anchor(incorporate(caption, profile));
      raw_anchor_[caption] = anchor(caption);
    };
    add_caption_roles(scenario_.caption);
    for (const auto& a : scenario_.attempts) {
      if (a.caption) add_caption_roles(*a.caption);
    }
    for (const auto& [seed, a] : scenario_.by_seed) {
      if (a.caption) add_caption_roles(*a.caption);
    }
    const auto texts = prompts.render(profile.name);
    for (std::size_t i = 0; i < 3; ++i) size_anchor_[i] = anchor(texts[i]);
  }

  // anchor index -> required similarity for one attempt
  std::map<std::size_t, double> requirements(const ScriptedAttempt& a) const {
    std::map<std::size_t, double> req;
    auto need = [&req](std::size_t idx, double sim) {
      auto [it, inserted] = req.emplace(idx, sim);
      if (!inserted && std::abs(it->second - sim) > 1e-12) {
        throw ScenarioError("scripted similarities conflict: one text is asked for two different similarities");
      }
    };
    const std::string& caption = a.caption ? *a.caption : scenario_.caption;
    need(refined_anchor_.at(caption), a.content[0]);
    need(raw_anchor_.at(caption), a.content[1]);
    for (std::size_t i = 0; i < 3; ++i) need(size_anchor_[i], a.volume[i]);
    return req;
  }

  void solve_geometry() {
    const std::size_t needed = anchor_texts_.size() + 2;
    if (scenario_.dimension < needed) scenario_.dimension = needed;

    std::vector<const ScriptedAttempt*> entries;
    for (const auto& a : scenario_.attempts) entries.push_back(&a);
    for (const auto& [seed, a] : scenario_.by_seed) entries.push_back(&a);
    std::vector<std::map<std::size_t, double>> reqs;
    for (const auto* e : entries) reqs.push_back(requirements(*e));

    auto worst_slack = [&](double beta) {
      const double gamma2 = 1.0 - beta * beta;
      double worst = 1.0;
      for (std::size_t k = 0; k < entries.size(); ++k) {
        const double q = entries[k]->quality;
        double sq = q * q;
        for (const auto& [idx, sim] : reqs[k]) {
          const double d = sim - beta * q;
          sq += d * d / gamma2;
        }
        worst = std::min(worst, 1.0 - sq);
      }
      return worst;
    };

    double best_beta = 0.0;
    double best = worst_slack(0.0);
    for (int step = -190; step <= 190; ++step) {
      const double beta = step * 0.005;
      const double slack = worst_slack(beta);
      if (slack > best + 1e-15) {
        best = slack;
        best_beta = beta;
      }
    }
    if (best < -1e-12) {
      throw ScenarioError("scripted similarities are not jointly realizable by unit embeddings");
    }
    beta_ = best_beta;

    const std::size_t dim = scenario_.dimension;
    product_dir_.assign(dim, 0.0);
    product_dir_[0] = 1.0;
    const double gamma = std::sqrt(1.0 - beta_ * beta_);
    anchor_vectors_.clear();
    for (std::size_t i = 0; i < anchor_texts_.size(); ++i) {
      Embedding t(dim, 0.0);
      t[0] = beta_;
      t[i + 1] = gamma;
      anchor_vectors_.push_back(normalized(t));
    }
  }

  std::optional<ScriptedAttempt> lookup(const std::string& digest) const {
    std::lock_guard lock(mu_);
    if (auto it = generated_.find(digest); it != generated_.end()) return it->second;
    return std::nullopt;
  }

  StubScenario scenario_;
  double beta_ = 0.0;
  Embedding product_dir_;
  std::vector<std::string> anchor_texts_;
  std::map<std::string, std::size_t> anchor_index_;
  std::vector<Embedding> anchor_vectors_;
  std::map<std::string, std::size_t> refined_anchor_;
  std::map<std::string, std::size_t> raw_anchor_;
  std::array<std::size_t, 3> size_anchor_{};

  mutable std::mutex mu_;
  std::optional<std::uint64_t> first_seed_;
  std::map<std::string, ScriptedAttempt> generated_;
};

class ScenarioEmbedder : public Embedder {
 public:
  explicit ScenarioEmbedder(std::shared_ptr<const ScenarioWorld> world) : world_(std::move(world)) {}
  Embedding embed_image(const Image& image) override { return world_->image_vector(image); }
  Embedding embed_text(std::string_view text) override { return world_->text_vector(text); }
  std::size_t dimension() const override { return world_->dimension(); }

 private:
  std::shared_ptr<const ScenarioWorld> world_;
};

class ScenarioCaptioner : public Captioner {
 public:
  explicit ScenarioCaptioner(std::shared_ptr<const ScenarioWorld> world) : world_(std::move(world)) {}
  std::string caption(const Image& image) override { return world_->caption_for(image); }

 private:
  std::shared_ptr<const ScenarioWorld> world_;
};

class ScenarioInpainter : public Inpainter {
 public:
  explicit ScenarioInpainter(std::shared_ptr<ScenarioWorld> world) : world_(std::move(world)) {}
  Image inpaint(const Image& background, const BinaryMask& mask, std::string_view prompt,
                std::uint64_t seed) override {
    Image out = painter_.inpaint(background, mask, prompt, seed);
    world_->register_generated(out, seed);
    return out;
  }

 private:
  std::shared_ptr<ScenarioWorld> world_;
  StubInpainter painter_;
};

struct ScenarioProviders {
  std::shared_ptr<ScenarioWorld> world;
  Providers providers;
};

/// Builds a fresh world (its own seed bookkeeping) and the five providers on it.
inline ScenarioProviders make_scenario_providers(const StubScenario& scenario, const ProductProfile& profile,
                                                 const SizePromptSet& prompts = {}) {
  auto world = std::make_shared<ScenarioWorld>(scenario, profile, prompts);
  Providers providers(std::make_shared<ScenarioEmbedder>(world),
                      std::make_shared<StubSegmenter>(world->scenario().heatmap.function()),
                      std::make_shared<StubVisualQA>(world->scenario().vqa_answer),
                      std::make_shared<ScenarioCaptioner>(world), std::make_shared<ScenarioInpainter>(world));
  return {std::move(world), std::move(providers)};
}

}  // namespace vpp
