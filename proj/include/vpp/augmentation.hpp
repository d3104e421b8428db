// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Fine-tuning dataset construction (random scale + random crop of the
// product samples) and fine-tune job descriptors for an external trainer.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vpp/domain.hpp"
#include "vpp/image.hpp"
#include "vpp/providers.hpp"

namespace vpp {

struct AugmentationSpec {
  int target_count = 1000;
  std::pair<double, double> scale_range{0.5, 1.5};
  std::pair<double, double> crop_fraction_range{0.7, 1.0};
  std::uint64_t rng_seed = 0;
  /// Side of the square training image every crop is resized to.
  int resolution = 512;
};

inline std::vector<std::string> augmentation_violations(const AugmentationSpec& s) {
  std::vector<std::string> v;
  if (s.target_count < 0) v.emplace_back("target_count: must be >= 0");
  auto range_ok = [](const std::pair<double, double>& r) { return r.first > 0.0 && r.first <= r.second; };
  if (!range_ok(s.scale_range)) v.emplace_back("scale_range: need 0 < min <= max");
  if (!range_ok(s.crop_fraction_range) || s.crop_fraction_range.second > 1.0) {
    v.emplace_back("crop_fraction_range: need 0 < min <= max <= 1");
  }
  if (s.resolution < 1) v.emplace_back("resolution: must be >= 1");
  return v;
}

inline void validate_augmentation(const AugmentationSpec& s) {
  auto v = augmentation_violations(s);
  if (!v.empty()) throw ConfigError(std::move(v));
}

struct CropRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend bool operator==(const CropRect&, const CropRect&) = default;
};

/// Provenance of one augmented image. The crop is expressed in the pixel
/// grid of the source after scaling.
struct ManifestRow {
  std::string file;
  int source_index = 0;
  double scale = 1.0;
  CropRect crop;
  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct SampleSize {
  int width = 0;
  int height = 0;
};

inline int scaled_extent(int extent, double scale) {
  return std::max(1, static_cast<int>(std::lround(extent * scale)));
}

/// Per-index generator, so any row can be produced independently of the
/// others.
inline std::mt19937_64 row_rng(std::uint64_t seed, std::size_t index) {
  return std::mt19937_64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
}

/// Sample i is drawn from source i mod n.
inline std::vector<ManifestRow> plan_augmentation(std::span<const SampleSize> samples, const AugmentationSpec& spec) {
  validate_augmentation(spec);
  if (spec.target_count > 0 && samples.empty()) throw ContractError("augment: no sample images");
  for (const auto& s : samples) {
    if (s.width < 1 || s.height < 1) throw ContractError("augment: sample image with empty dimensions");
  }
  std::vector<ManifestRow> rows;
  rows.reserve(static_cast<std::size_t>(spec.target_count));
  auto lerp = [](const std::pair<double, double>& r, double u) { return r.first + (r.second - r.first) * u; };
  for (int i = 0; i < spec.target_count; ++i) {
    auto rng = row_rng(spec.rng_seed, static_cast<std::size_t>(i));
    ManifestRow row;
    row.source_index = i % static_cast<int>(samples.size());
    const auto& src = samples[static_cast<std::size_t>(row.source_index)];
    row.scale = lerp(spec.scale_range, unit_uniform(rng));
    const int sw = scaled_extent(src.width, row.scale);
    const int sh = scaled_extent(src.height, row.scale);
    const double frac = lerp(spec.crop_fraction_range, unit_uniform(rng));
    row.crop.w = std::clamp(static_cast<int>(std::lround(sw * frac)), 1, sw);
    row.crop.h = std::clamp(static_cast<int>(std::lround(sh * frac)), 1, sh);
    row.crop.x = std::min(sw - row.crop.w, static_cast<int>(unit_uniform(rng) * (sw - row.crop.w + 1)));
    row.crop.y = std::min(sh - row.crop.h, static_cast<int>(unit_uniform(rng) * (sh - row.crop.h + 1)));
    char name[32];
    std::snprintf(name, sizeof name, "aug_%05d.png", i);
    row.file = name;
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Resamples the crop window of the scaled source to resolution x resolution
/// with bilinear interpolation (scale and resize folded into one mapping).
inline Image render_row(const Image& source, const ManifestRow& row, int resolution) {
  Image out(resolution, resolution, source.channels);
  const double step_x = static_cast<double>(row.crop.w) / resolution;
  const double step_y = static_cast<double>(row.crop.h) / resolution;
  for (int v = 0; v < resolution; ++v) {
    const double scaled_y = row.crop.y + (v + 0.5) * step_y;
    const double sy = std::clamp(scaled_y / row.scale - 0.5, 0.0, source.height - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, source.height - 1);
    const double fy = sy - y0;
    for (int u = 0; u < resolution; ++u) {
      const double scaled_x = row.crop.x + (u + 0.5) * step_x;
      const double sx = std::clamp(scaled_x / row.scale - 0.5, 0.0, source.width - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, source.width - 1);
      const double fx = sx - x0;
      auto* dst = out.px(u, v);
      for (int c = 0; c < source.channels; ++c) {
        const double top = source.px(x0, y0)[c] * (1 - fx) + source.px(x1, y0)[c] * fx;
        const double bottom = source.px(x0, y1)[c] * (1 - fx) + source.px(x1, y1)[c] * fx;
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bottom * fy), 0L, 255L));
      }
    }
  }
  return out;
}

struct Dataset {
  std::vector<ManifestRow> manifest;
  std::vector<Image> images;  // parallel to manifest; empty when only planned
};

inline Dataset augment(std::span<const Image> samples, const AugmentationSpec& spec, bool render = true) {
  std::vector<SampleSize> sizes;
  for (const auto& s : samples) sizes.push_back({s.width, s.height});
  Dataset ds;
  ds.manifest = plan_augmentation(sizes, spec);
  if (render) {
    ds.images.reserve(ds.manifest.size());
    for (const auto& row : ds.manifest) {
      ds.images.push_back(render_row(samples[static_cast<std::size_t>(row.source_index)], row, spec.resolution));
    }
  }
  return ds;
}

inline void to_json(json& j, const ManifestRow& r) {
  j = json{{"file", r.file},
           {"source_index", r.source_index},
           {"scale", r.scale},
           {"crop", {r.crop.x, r.crop.y, r.crop.w, r.crop.h}}};
}

inline void from_json(const json& j, ManifestRow& r) {
  j.at("file").get_to(r.file);
  j.at("source_index").get_to(r.source_index);
  j.at("scale").get_to(r.scale);
  const auto& c = j.at("crop");
  r.crop = {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>(), c.at(3).get<int>()};
}

inline void to_json(json& j, const AugmentationSpec& s) {
  j = json{{"target_count", s.target_count},
           {"scale_range", {s.scale_range.first, s.scale_range.second}},
           {"crop_fraction_range", {s.crop_fraction_range.first, s.crop_fraction_range.second}},
           {"rng_seed", s.rng_seed},
           {"resolution", s.resolution}};
}

inline void from_json(const json& j, AugmentationSpec& s) {
  s = AugmentationSpec{};
  detail::get_to_if(j, "target_count", s.target_count);
  detail::get_to_if(j, "scale_range", s.scale_range);
  detail::get_to_if(j, "crop_fraction_range", s.crop_fraction_range);
  detail::get_to_if(j, "rng_seed", s.rng_seed);
  detail::get_to_if(j, "resolution", s.resolution);
}

// ---------------------------------------------------------------------------
// Fine-tune jobs
// ---------------------------------------------------------------------------

struct FinetuneJob {
  std::string job_id;
  std::string product_id;
  std::string dataset_ref;
  std::size_t dataset_size = 0;
  std::string prompt;
  int steps = 1600;
  double learning_rate = 5e-6;
  int batch_size = 1;
  std::string output_model_ref;
};

struct FinetuneOverrides {
  std::optional<int> steps;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
};

inline void from_json(const json& j, FinetuneOverrides& o) {
  o.steps = detail::get_opt<int>(j, "steps");
  o.learning_rate = detail::get_opt<double>(j, "learning_rate");
  o.batch_size = detail::get_opt<int>(j, "batch_size");
}

/// Builds the job with the product's rendered prompt. The id is a digest of
/// the job contents, so resubmitting the same job deduplicates.
inline FinetuneJob build_finetune_job(const ProductProfile& profile, const std::string& dataset_ref,
                                      std::size_t dataset_size, const FinetuneOverrides& overrides = {}) {
  if (dataset_size == 0) throw ContractError("build_finetune_job: dataset is empty");
  FinetuneJob job;
  job.product_id = profile.product_id;
  job.dataset_ref = dataset_ref;
  job.dataset_size = dataset_size;
  job.prompt = render_prompt(profile);
  if (overrides.steps) job.steps = *overrides.steps;
  if (overrides.learning_rate) job.learning_rate = *overrides.learning_rate;
  if (overrides.batch_size) job.batch_size = *overrides.batch_size;
  std::vector<std::string> v;
  if (job.steps <= 0) v.emplace_back("steps: must be > 0");
  if (!(job.learning_rate > 0.0)) v.emplace_back("learning_rate: must be > 0");
  if (job.batch_size < 1) v.emplace_back("batch_size: must be >= 1");
  if (!v.empty()) throw ConfigError(std::move(v));
  char lr[32];
  std::snprintf(lr, sizeof lr, "%.17g", job.learning_rate);
  job.job_id = "job-" + sha256_hex(job.product_id + "|" + job.dataset_ref + "|" + job.prompt + "|" +
                                   std::to_string(job.steps) + "|" + lr + "|" + std::to_string(job.batch_size))
                            .substr(0, 20);
  job.output_model_ref = "models/" + job.product_id + "/" + job.job_id;
  return job;
}

inline void to_json(json& j, const FinetuneJob& job) {
  j = json{{"job_id", job.job_id},
           {"product_id", job.product_id},
           {"dataset_ref", job.dataset_ref},
           {"dataset_size", job.dataset_size},
           {"prompt", job.prompt},
           {"steps", job.steps},
           {"learning_rate", job.learning_rate},
           {"batch_size", job.batch_size},
           {"output_model_ref", job.output_model_ref}};
}

inline void from_json(const json& j, FinetuneJob& job) {
  j.at("job_id").get_to(job.job_id);
  j.at("product_id").get_to(job.product_id);
  j.at("dataset_ref").get_to(job.dataset_ref);
  detail::get_to_if(j, "dataset_size", job.dataset_size);
  j.at("prompt").get_to(job.prompt);
  j.at("steps").get_to(job.steps);
  j.at("learning_rate").get_to(job.learning_rate);
  j.at("batch_size").get_to(job.batch_size);
  detail::get_to_if(j, "output_model_ref", job.output_model_ref);
}

struct TrainingResult {
  std::string model_ref;
  std::uint64_t size_bytes = 0;
};

/// External training endpoint. Weight updates happen out of process.
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual TrainingResult submit(const FinetuneJob& job) = 0;
};

/// Completes instantly with a fixed model size, or fails when scripted to.
class StubTrainer : public Trainer {
 public:
  static constexpr std::uint64_t kDefaultModelBytes = 2'200'000'000ULL;

  explicit StubTrainer(bool fail = false, std::uint64_t model_bytes = kDefaultModelBytes)
      : fail_(fail), model_bytes_(model_bytes) {}

  TrainingResult submit(const FinetuneJob& job) override {
    if (fail_) throw ProviderError(ProviderFailure::backend, 1, "training endpoint rejected job " + job.job_id);
    return {job.output_model_ref, model_bytes_};
  }

 private:
  bool fail_;
  std::uint64_t model_bytes_;
};

}  // namespace vpp
