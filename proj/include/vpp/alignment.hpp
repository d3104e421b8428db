// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// The alignment cascade: Content -> Quality -> Volume. Each gate is a
// strict-inequality comparison of a score against its threshold, and a
// failing gate ends the cascade before any later gate touches a provider.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "vpp/domain.hpp"
#include "vpp/providers.hpp"

namespace vpp {

class DegenerateCentroid : public ContractError {
 public:
  using ContractError::ContractError;
};

// ---------------------------------------------------------------------------
// Scoring arithmetic
// ---------------------------------------------------------------------------

/// 100 x cosine similarity of two unit embeddings.
inline double clip_score(std::span<const double> image_embedding, std::span<const double> text_embedding) {
  const double ni = l2_norm(image_embedding);
  const double nt = l2_norm(text_embedding);
  if (!(ni > 0.0) || !(nt > 0.0)) throw ContractError("clip_score: zero-norm input");
  if (std::abs(ni - 1.0) > kUnitNormTolerance || std::abs(nt - 1.0) > kUnitNormTolerance) {
    throw ContractError("clip_score: inputs must be unit vectors");
  }
  return std::clamp(100.0 * dot(image_embedding, text_embedding), -100.0, 100.0);
}

/// softmax(logit_scale * similarities), computed with the max-shift trick.
inline std::vector<double> scaled_softmax(std::span<const double> similarities, double logit_scale) {
  if (similarities.empty()) throw ContractError("scaled_softmax: empty input");
  if (!(logit_scale > 0.0)) throw ContractError("scaled_softmax: logit_scale must be > 0");
  const double top = *std::max_element(similarities.begin(), similarities.end());
  std::vector<double> out(similarities.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logit_scale * (similarities[i] - top));
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

inline bool gate_passes(double score, double threshold) { return score > threshold; }

inline Embedding compute_centroid(std::span<const Embedding> samples) {
  if (samples.empty()) throw ContractError("compute_centroid: at least one sample embedding is required");
  const std::size_t dim = samples.front().size();
  Embedding mean(dim, 0.0);
  for (const auto& s : samples) {
    if (s.size() != dim) throw ContractError("compute_centroid: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) mean[i] += s[i];
  }
  for (double& x : mean) x /= static_cast<double>(samples.size());
  if (l2_norm(mean) < 1e-12) throw DegenerateCentroid("compute_centroid: sample mean has zero norm");
  return normalized(mean);
}

// ---------------------------------------------------------------------------
// Caption refinement
// ---------------------------------------------------------------------------

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

/// Appends the product term to a caption unless the caption already names it.
inline std::string incorporate(std::string_view caption, const ProductProfile& profile) {
  if (caption.empty()) throw ContractError("incorporate: caption must be non-empty");
  const std::string& term = profile.caption_subject();
  if (detail::lower(caption).find(detail::lower(term)) != std::string::npos) return std::string(caption);
  return std::string(caption) + ", with a " + term;
}

// ---------------------------------------------------------------------------
// Size prompts
// ---------------------------------------------------------------------------

/// Templates for the undersized / appropriate / oversized classes. `{name}`
/// is replaced by the product name.
struct SizePromptSet {
  std::string undersized = "a photo of a too small {name}";
  std::string appropriate = "a photo of a {name} of realistic size";
  std::string oversized = "a photo of a too large {name}";

  std::array<std::string, 3> render(std::string_view name) const {
    std::array<std::string, 3> out{undersized, appropriate, oversized};
    for (auto& s : out) detail::replace_all(s, "{name}", name);
    if (out[0].empty() || out[1].empty() || out[2].empty() || out[0] == out[1] || out[1] == out[2] ||
        out[0] == out[2]) {
      throw ContractError("size prompts must be three distinct non-empty texts");
    }
    return out;
  }
};

inline void to_json(json& j, const SizePromptSet& s) {
  j = json{{"undersized_prompt", s.undersized}, {"appropriate_prompt", s.appropriate}, {"oversized_prompt", s.oversized}};
}

inline void from_json(const json& j, SizePromptSet& s) {
  s = SizePromptSet{};
  detail::get_to_if(j, "undersized_prompt", s.undersized);
  detail::get_to_if(j, "appropriate_prompt", s.appropriate);
  detail::get_to_if(j, "oversized_prompt", s.oversized);
}

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------

struct ContentResult {
  double probability = 0.0;
  bool pass = false;
  std::string caption;
  std::string modified_caption;
};

/// Two-way softmax between the product-refined caption and the raw caption.
/// The refined caption's probability is the product-presence score.
inline ContentResult content_gate(const Image& image, const ProductProfile& profile, const Providers& providers,
                                  const AlignmentConfig& config) {
  ContentResult r;
  r.caption = providers.caption(image);
  if (r.caption.empty()) throw ProviderError(ProviderFailure::malformed, 1, "captioner returned an empty caption");
  r.modified_caption = incorporate(r.caption, profile);
  const Embedding img = providers.embed_image(image);
  const Embedding refined = providers.embed_text(r.modified_caption);
  const Embedding raw = providers.embed_text(r.caption);
  const std::array<double, 2> sims{dot(img, refined), dot(img, raw)};
  r.probability = scaled_softmax(sims, config.logit_scale)[0];
  r.pass = gate_passes(r.probability, config.content_threshold);
  return r;
}

struct QualityResult {
  double mqs = 0.0;
  bool pass = false;
};

/// Cosine between the product's sample-image centroid and the generated image.
inline QualityResult quality_gate(const Image& image, const ProductProfile& profile, const Providers& providers,
                                  const AlignmentConfig& config) {
  if (!profile.centroid) throw ContractError("quality_gate: product has no centroid");
  const Embedding img = providers.embed_image(image);
  QualityResult r;
  r.mqs = std::clamp(dot(*profile.centroid, img), -1.0, 1.0);
  r.pass = gate_passes(r.mqs, config.quality_threshold);
  return r;
}

struct VolumeResult {
  VolumeDistribution distribution{};
  VolumeVerdict verdict = VolumeVerdict::appropriate;
  bool pass = false;
};

/// Argmax class; ties involving the appropriate class resolve to it.
inline VolumeVerdict verdict_of(const VolumeDistribution& d) {
  const double top = std::max({d[0], d[1], d[2]});
  if (d[1] == top) return VolumeVerdict::appropriate;
  return d[0] == top ? VolumeVerdict::too_small : VolumeVerdict::too_large;
}

inline VolumeResult volume_from_similarities(std::span<const double> sims, const AlignmentConfig& config) {
  if (sims.size() != 3) throw ContractError("volume gate needs exactly three similarities");
  const auto p = scaled_softmax(sims, config.logit_scale);
  VolumeResult r;
  r.distribution = {p[0], p[1], p[2]};
  r.verdict = verdict_of(r.distribution);
  r.pass = gate_passes(r.distribution[1], config.volume_threshold);
  return r;
}

inline VolumeResult volume_gate(const Image& image, const ProductProfile& profile, const Providers& providers,
                                const AlignmentConfig& config, const SizePromptSet& prompts) {
  const auto texts = prompts.render(profile.name);
  const Embedding img = providers.embed_image(image);
  std::array<double, 3> sims{};
  for (std::size_t i = 0; i < 3; ++i) sims[i] = dot(img, providers.embed_text(texts[i]));
  return volume_from_similarities(sims, config);
}

// ---------------------------------------------------------------------------
// Cascade
// ---------------------------------------------------------------------------

inline AlignmentReport run_cascade(const Image& image, const ProductProfile& profile, const Providers& providers,
                                   const AlignmentConfig& config, const SizePromptSet& prompts = {}) {
  AlignmentReport::Fields f;

  ContentResult content;
  try {
    content = content_gate(image, profile, providers, config);
  } catch (const ProviderError& e) {
    throw e.with_stage("content");
  }
  f.content_probability = content.probability;
  f.caption = content.caption;
  f.modified_caption = content.modified_caption;
  if (!content.pass) {
    f.stage_reached = CascadeStage::content;
    return AlignmentReport(std::move(f));
  }

  QualityResult quality;
  try {
    quality = quality_gate(image, profile, providers, config);
  } catch (const ProviderError& e) {
    throw e.with_stage("quality");
  }
  f.quality_score = quality.mqs;
  if (!quality.pass) {
    f.stage_reached = CascadeStage::quality;
    return AlignmentReport(std::move(f));
  }

  VolumeResult volume;
  try {
    volume = volume_gate(image, profile, providers, config, prompts);
  } catch (const ProviderError& e) {
    throw e.with_stage("volume");
  }
  f.volume_distribution = volume.distribution;
  f.volume_verdict = volume.verdict;
  f.stage_reached = volume.pass ? CascadeStage::accepted : CascadeStage::volume;
  return AlignmentReport(std::move(f));
}

}  // namespace vpp
