// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Shared domain types for the placement pipeline: product profiles, masks,
// gate configuration, alignment reports and generation runs, together with
// their validation rules and JSON wire representation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace vpp {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or invariant violated by a caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// One or more configuration fields are invalid. Every violation is kept.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

using Embedding = std::vector<double>;

inline constexpr double kUnitNormTolerance = 1e-6;

inline double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("dot: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline bool is_unit(std::span<const double> v, double tol = kUnitNormTolerance) {
  return !v.empty() && std::abs(l2_norm(v) - 1.0) <= tol;
}

inline Embedding normalized(std::span<const double> v) {
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw ContractError("cannot normalize a zero-norm vector");
  Embedding out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

// ---------------------------------------------------------------------------
// BinaryMask and Heatmap
// ---------------------------------------------------------------------------

/// Row-major boolean grid naming an inpainting region. Bits are stored as
/// 0/1 bytes.
class BinaryMask {
 public:
  BinaryMask() = default;

  BinaryMask(int width, int height, bool fill = false)
      : width_(checked_dim(width)), height_(checked_dim(height)),
        bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0) {}

  BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
      : width_(checked_dim(width)), height_(checked_dim(height)), bits_(std::move(bits)) {
    if (bits_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
      throw ContractError("mask bits length must equal width x height");
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  /// Builds a mask from nested rows of 0/1 values (top row first).
  static BinaryMask from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    const int h = static_cast<int>(rows.size());
    const int w = h == 0 ? 0 : static_cast<int>(rows.begin()->size());
    std::vector<std::uint8_t> bits;
    bits.reserve(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != w) throw ContractError("ragged mask rows");
      for (int v : row) bits.push_back(v ? 1 : 0);
    }
    return BinaryMask(w, h, std::move(bits));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> mutable_bits() noexcept { return bits_; }

  std::size_t area() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  BinaryMask complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  static int checked_dim(int d) {
    if (d < 0) throw ContractError("mask dimensions must be non-negative");
    return d;
  }

  std::size_t index(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) throw ContractError("mask index out of range");
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Per-pixel segmentation scores in [0,1], row-major.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> scores;

  double at(int x, int y) const {
    return scores[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }

  void validate() const {
    if (width < 0 || height < 0) throw ContractError("heatmap dimensions must be non-negative");
    if (scores.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ContractError("heatmap scores length must equal width x height");
    }
    for (double s : scores) {
      if (!(s >= 0.0 && s <= 1.0)) throw ContractError("heatmap score outside [0,1]");
    }
  }
};

// ---------------------------------------------------------------------------
// ProductProfile
// ---------------------------------------------------------------------------

/// Which product term the content gate appends to a caption.
enum class CaptionTerm { name, super_class };

NLOHMANN_JSON_SERIALIZE_ENUM(CaptionTerm, {{CaptionTerm::name, "name"}, {CaptionTerm::super_class, "super_class"}})

struct ProductProfile {
  std::string product_id;
  std::string name;
  std::optional<std::string> super_class;
  std::string identifier_token = "sks";
  std::string prompt_template = "A photorealistic image of a {token} {name}";
  std::vector<std::string> sample_images;
  std::string placement_query = "Which object in the image has a flat surface area?";
  std::optional<Embedding> centroid;
  CaptionTerm caption_term = CaptionTerm::name;

  /// The product term used when refining captions.
  const std::string& caption_subject() const {
    return caption_term == CaptionTerm::super_class && super_class ? *super_class : name;
  }
};

inline std::vector<std::string> profile_violations(const ProductProfile& p) {
  std::vector<std::string> v;
  if (p.product_id.empty()) v.emplace_back("product_id: must be non-empty");
  if (p.name.empty()) v.emplace_back("name: must be non-empty");
  if (p.sample_images.empty()) v.emplace_back("sample_images: at least one sample image is required");
  if (p.identifier_token.empty() ||
      p.identifier_token.find_first_of(" \t\r\n\v\f") != std::string::npos) {
    v.emplace_back("identifier_token: must be a single whitespace-free token");
  }
  if (p.placement_query.empty()) v.emplace_back("placement_query: must be non-empty");
  if (p.caption_term == CaptionTerm::super_class && (!p.super_class || p.super_class->empty())) {
    v.emplace_back("caption_term: super_class mode requires a super_class");
  }
  if (p.centroid && !is_unit(*p.centroid)) v.emplace_back("centroid: must have unit L2 norm");
  return v;
}

inline const ProductProfile& validate_profile(const ProductProfile& p) {
  auto v = profile_violations(p);
  if (!v.empty()) throw ConfigError(std::move(v));
  return p;
}

namespace detail {

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

inline std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace detail

/// Fills the `{token}` and `{name}` slots of the profile's prompt template.
inline std::string render_prompt(const ProductProfile& profile) {
  const auto& tpl = profile.prompt_template;
  if (detail::count_occurrences(tpl, "{token}") != 1) {
    throw ContractError("prompt_template must contain the {token} slot exactly once");
  }
  if (detail::count_occurrences(tpl, "{name}") != 1) {
    throw ContractError("prompt_template must contain the {name} slot exactly once");
  }
  std::string out = tpl;
  detail::replace_all(out, "{token}", profile.identifier_token);
  detail::replace_all(out, "{name}", profile.name);
  if (detail::count_occurrences(out, profile.identifier_token) != 1) {
    throw ContractError("rendered prompt must contain the identifier token exactly once");
  }
  return out;
}

// ---------------------------------------------------------------------------
// AlignmentConfig
// ---------------------------------------------------------------------------

struct AlignmentConfig {
  double content_threshold = 0.7;
  double quality_threshold = 0.7;
  double volume_threshold = 0.34;
  double segmentation_threshold = 0.7;
  int max_attempts = 10;
  double logit_scale = 100.0;

  friend bool operator==(const AlignmentConfig&, const AlignmentConfig&) = default;
};

inline std::vector<std::string> config_violations(const AlignmentConfig& c) {
  std::vector<std::string> v;
  auto check = [&v](double value, const char* field) {
    if (!(value >= 0.0 && value <= 1.0)) v.push_back(std::string(field) + ": threshold out of range");
  };
  check(c.content_threshold, "content_threshold");
  check(c.quality_threshold, "quality_threshold");
  check(c.volume_threshold, "volume_threshold");
  check(c.segmentation_threshold, "segmentation_threshold");
  if (c.max_attempts < 1) v.emplace_back("max_attempts: max_attempts < 1");
  if (!(c.logit_scale > 0.0) || !std::isfinite(c.logit_scale)) v.emplace_back("logit_scale: must be > 0");
  return v;
}

inline AlignmentConfig validate_config(const AlignmentConfig& config) {
  auto v = config_violations(config);
  if (!v.empty()) throw ConfigError(std::move(v));
  return config;
}

// ---------------------------------------------------------------------------
// MorphParams
// ---------------------------------------------------------------------------

struct MorphParams {
  int kernel_size = 5;
  int erosion_iterations = 0;
  int dilation_iterations = 0;
  int step_per_adjust = 10;

  friend bool operator==(const MorphParams&, const MorphParams&) = default;
};

inline std::vector<std::string> morph_violations(const MorphParams& m) {
  std::vector<std::string> v;
  if (m.kernel_size < 1 || m.kernel_size % 2 == 0) v.emplace_back("kernel_size: must be odd and >= 1");
  if (m.erosion_iterations < 0) v.emplace_back("erosion_iterations: must be >= 0");
  if (m.dilation_iterations < 0) v.emplace_back("dilation_iterations: must be >= 0");
  if (m.step_per_adjust < 0) v.emplace_back("step_per_adjust: must be >= 0");
  return v;
}

inline MorphParams validate_morph(const MorphParams& m) {
  auto v = morph_violations(m);
  if (!v.empty()) throw ConfigError(std::move(v));
  return m;
}

// ---------------------------------------------------------------------------
// AlignmentReport
// ---------------------------------------------------------------------------

enum class VolumeVerdict { too_small, appropriate, too_large };

NLOHMANN_JSON_SERIALIZE_ENUM(VolumeVerdict, {{VolumeVerdict::too_small, "too_small"},
                                             {VolumeVerdict::appropriate, "appropriate"},
                                             {VolumeVerdict::too_large, "too_large"}})

enum class CascadeStage { content, quality, volume, accepted };

NLOHMANN_JSON_SERIALIZE_ENUM(CascadeStage, {{CascadeStage::content, "content"},
                                            {CascadeStage::quality, "quality"},
                                            {CascadeStage::volume, "volume"},
                                            {CascadeStage::accepted, "accepted"}})

using VolumeDistribution = std::array<double, 3>;

/// Outcome of the content -> quality -> volume cascade for one image.
/// Construction enforces the short-circuit shape: a gate's score is present
/// only if every earlier gate was evaluated and passed.
class AlignmentReport {
 public:
  struct Fields {
    std::optional<double> content_probability;
    std::optional<double> quality_score;
    std::optional<VolumeDistribution> volume_distribution;
    std::optional<VolumeVerdict> volume_verdict;
    CascadeStage stage_reached = CascadeStage::content;
    std::string caption;
    std::string modified_caption;
    bool unfiltered = false;
  };

  explicit AlignmentReport(Fields f) : f_(std::move(f)) { check(); }

  /// Report for an image returned without running the cascade.
  static AlignmentReport unfiltered_pass() {
    Fields f;
    f.stage_reached = CascadeStage::accepted;
    f.unfiltered = true;
    return AlignmentReport(std::move(f));
  }

  const std::optional<double>& content_probability() const noexcept { return f_.content_probability; }
  const std::optional<double>& quality_score() const noexcept { return f_.quality_score; }
  const std::optional<VolumeDistribution>& volume_distribution() const noexcept { return f_.volume_distribution; }
  const std::optional<VolumeVerdict>& volume_verdict() const noexcept { return f_.volume_verdict; }
  CascadeStage stage_reached() const noexcept { return f_.stage_reached; }
  bool passed() const noexcept { return f_.stage_reached == CascadeStage::accepted; }
  bool unfiltered() const noexcept { return f_.unfiltered; }
  const std::string& caption() const noexcept { return f_.caption; }
  const std::string& modified_caption() const noexcept { return f_.modified_caption; }
  const Fields& fields() const noexcept { return f_; }

  /// Probability of the "appropriate size" class, when the volume gate ran.
  std::optional<double> volume_appropriate() const {
    if (!f_.volume_distribution) return std::nullopt;
    return (*f_.volume_distribution)[1];
  }

  friend bool operator==(const AlignmentReport& a, const AlignmentReport& b) {
    const auto& x = a.f_;
    const auto& y = b.f_;
    return x.content_probability == y.content_probability && x.quality_score == y.quality_score &&
           x.volume_distribution == y.volume_distribution && x.volume_verdict == y.volume_verdict &&
           x.stage_reached == y.stage_reached && x.caption == y.caption &&
           x.modified_caption == y.modified_caption && x.unfiltered == y.unfiltered;
  }

 private:
  void check() const {
    const auto& f = f_;
    if (f.content_probability && !(*f.content_probability >= 0.0 && *f.content_probability <= 1.0)) {
      throw ContractError("content_probability outside [0,1]");
    }
    if (f.quality_score && !(*f.quality_score >= -1.0 - 1e-9 && *f.quality_score <= 1.0 + 1e-9)) {
      throw ContractError("quality_score outside [-1,1]");
    }
    if (f.volume_distribution) {
      double sum = 0.0;
      for (double p : *f.volume_distribution) {
        if (!(p >= 0.0 && p <= 1.0)) throw ContractError("volume probability outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ContractError("volume_distribution must sum to 1");
    }
    if (f.volume_distribution.has_value() != f.volume_verdict.has_value()) {
      throw ContractError("volume_distribution and volume_verdict must be present together");
    }
    if (f.unfiltered) {
      if (f.stage_reached != CascadeStage::accepted) throw ContractError("unfiltered report must be accepted");
      return;
    }
    const bool has_c = f.content_probability.has_value();
    const bool has_q = f.quality_score.has_value();
    const bool has_v = f.volume_distribution.has_value();
    switch (f.stage_reached) {
      case CascadeStage::content:
        if (has_q || has_v) throw ContractError("content-stage report cannot carry quality or volume data");
        if (!has_c) throw ContractError("content-stage report requires content_probability");
        break;
      case CascadeStage::quality:
        if (has_v) throw ContractError("quality-stage report cannot carry volume data");
        if (!has_c || !has_q) throw ContractError("quality-stage report requires content and quality scores");
        break;
      case CascadeStage::volume:
      case CascadeStage::accepted:
        if (!has_c || !has_q || !has_v) throw ContractError("report requires all three gate scores");
        break;
    }
  }

  Fields f_;
};

// ---------------------------------------------------------------------------
// GenerationRequest / GenerationRun
// ---------------------------------------------------------------------------

struct GenerationRequest {
  std::string background_ref;
  std::string product_id;
  std::optional<std::uint64_t> pinned_seed;
  /// Recorded base for seed_i = base_seed + i; drawn once per run when absent.
  std::optional<std::uint64_t> base_seed;
  AlignmentConfig config;
  MorphParams morph;
  bool filter_enabled = true;
  bool size_feedback_enabled = false;

  int effective_max_attempts() const { return pinned_seed ? 1 : config.max_attempts; }
};

struct Attempt {
  std::uint64_t seed = 0;
  std::string mask_ref;
  std::string image_ref;
  AlignmentReport report = AlignmentReport::unfiltered_pass();
};

enum class RunStatus { accepted, exhausted, failed };

NLOHMANN_JSON_SERIALIZE_ENUM(RunStatus, {{RunStatus::accepted, "accepted"},
                                         {RunStatus::exhausted, "exhausted"},
                                         {RunStatus::failed, "failed"}})

/// A failure or adjustment event tied to an attempt index.
struct RunEvent {
  std::string kind;
  std::string message;
  std::optional<int> attempt_index;
};

struct GenerationRun {
  std::string run_id;
  GenerationRequest request;
  std::uint64_t base_seed = 0;
  std::string placement;
  std::string placement_query;
  std::vector<Attempt> attempts;
  RunStatus status = RunStatus::exhausted;
  std::optional<int> accepted_index;
  /// Best attempt of an exhausted run, shown as a rejected preview.
  std::optional<int> preview_index;
  std::optional<RunEvent> error;
  std::vector<RunEvent> events;
};

/// Violations of the GenerationRun invariants; empty when the run is well formed.
inline std::vector<std::string> run_violations(const GenerationRun& run) {
  std::vector<std::string> v;
  const int n = static_cast<int>(run.attempts.size());
  const int max_attempts = run.request.effective_max_attempts();
  if (n > max_attempts) v.emplace_back("attempts exceed max_attempts");
  if (run.status != RunStatus::failed && n < 1) v.emplace_back("a completed run needs at least one attempt");
  if (run.status == RunStatus::failed && !run.error) v.emplace_back("failed run must carry an error");
  std::optional<int> first_pass;
  for (int i = 0; i < n; ++i) {
    if (run.attempts[static_cast<std::size_t>(i)].report.passed()) {
      first_pass = i;
      break;
    }
  }
  if (run.status == RunStatus::accepted) {
    if (!first_pass) v.emplace_back("accepted run without a passing attempt");
    if (run.accepted_index != first_pass) v.emplace_back("accepted_index must point at the first passing attempt");
    if (first_pass && *first_pass != n - 1) v.emplace_back("attempts continued after a pass");
  } else {
    if (run.accepted_index) v.emplace_back("only accepted runs carry accepted_index");
    if (run.status == RunStatus::exhausted && first_pass) v.emplace_back("exhausted run contains a passing attempt");
  }
  if (run.status == RunStatus::exhausted && n < max_attempts) v.emplace_back("exhausted before max_attempts");
  return v;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace detail

inline void to_json(json& j, const AlignmentConfig& c) {
  j = json{{"content_threshold", c.content_threshold},
           {"quality_threshold", c.quality_threshold},
           {"volume_threshold", c.volume_threshold},
           {"segmentation_threshold", c.segmentation_threshold},
           {"max_attempts", c.max_attempts},
           {"logit_scale", c.logit_scale}};
}

/// Missing fields keep their defaults, so partial overrides are accepted.
inline void from_json(const json& j, AlignmentConfig& c) {
  c = AlignmentConfig{};
  detail::get_to_if(j, "content_threshold", c.content_threshold);
  detail::get_to_if(j, "quality_threshold", c.quality_threshold);
  detail::get_to_if(j, "volume_threshold", c.volume_threshold);
  detail::get_to_if(j, "segmentation_threshold", c.segmentation_threshold);
  detail::get_to_if(j, "max_attempts", c.max_attempts);
  detail::get_to_if(j, "logit_scale", c.logit_scale);
}

inline void to_json(json& j, const MorphParams& m) {
  j = json{{"kernel_size", m.kernel_size},
           {"erosion_iterations", m.erosion_iterations},
           {"dilation_iterations", m.dilation_iterations},
           {"step_per_adjust", m.step_per_adjust}};
}

inline void from_json(const json& j, MorphParams& m) {
  m = MorphParams{};
  detail::get_to_if(j, "kernel_size", m.kernel_size);
  detail::get_to_if(j, "erosion_iterations", m.erosion_iterations);
  detail::get_to_if(j, "dilation_iterations", m.dilation_iterations);
  detail::get_to_if(j, "step_per_adjust", m.step_per_adjust);
}

inline void to_json(json& j, const ProductProfile& p) {
  j = json{{"product_id", p.product_id},
           {"name", p.name},
           {"identifier_token", p.identifier_token},
           {"prompt_template", p.prompt_template},
           {"sample_images", p.sample_images},
           {"placement_query", p.placement_query},
           {"caption_term", p.caption_term}};
  detail::put_opt(j, "super_class", p.super_class);
  detail::put_opt(j, "centroid", p.centroid);
}

inline void from_json(const json& j, ProductProfile& p) {
  p = ProductProfile{};
  detail::get_to_if(j, "product_id", p.product_id);
  detail::get_to_if(j, "name", p.name);
  p.super_class = detail::get_opt<std::string>(j, "super_class");
  detail::get_to_if(j, "identifier_token", p.identifier_token);
  detail::get_to_if(j, "prompt_template", p.prompt_template);
  detail::get_to_if(j, "sample_images", p.sample_images);
  detail::get_to_if(j, "placement_query", p.placement_query);
  p.centroid = detail::get_opt<Embedding>(j, "centroid");
  detail::get_to_if(j, "caption_term", p.caption_term);
}

inline void to_json(json& j, const AlignmentReport& r) {
  const auto& f = r.fields();
  j = json{{"stage_reached", f.stage_reached}, {"passed", r.passed()}};
  detail::put_opt(j, "content_probability", f.content_probability);
  detail::put_opt(j, "quality_score", f.quality_score);
  detail::put_opt(j, "volume_distribution", f.volume_distribution);
  detail::put_opt(j, "volume_verdict", f.volume_verdict);
  if (!f.caption.empty()) j["caption"] = f.caption;
  if (!f.modified_caption.empty()) j["modified_caption"] = f.modified_caption;
  if (f.unfiltered) j["unfiltered"] = true;
}

inline AlignmentReport report_from_json(const json& j) {
  AlignmentReport::Fields f;
  f.content_probability = detail::get_opt<double>(j, "content_probability");
  f.quality_score = detail::get_opt<double>(j, "quality_score");
  f.volume_distribution = detail::get_opt<VolumeDistribution>(j, "volume_distribution");
  f.volume_verdict = detail::get_opt<VolumeVerdict>(j, "volume_verdict");
  j.at("stage_reached").get_to(f.stage_reached);
  detail::get_to_if(j, "caption", f.caption);
  detail::get_to_if(j, "modified_caption", f.modified_caption);
  detail::get_to_if(j, "unfiltered", f.unfiltered);
  AlignmentReport r(std::move(f));
  if (auto it = j.find("passed"); it != j.end() && it->get<bool>() != r.passed()) {
    throw ContractError("report 'passed' disagrees with stage_reached");
  }
  return r;
}

inline void to_json(json& j, const GenerationRequest& r) {
  j = json{{"background_ref", r.background_ref},
           {"product_id", r.product_id},
           {"config", r.config},
           {"morph", r.morph},
           {"filter_enabled", r.filter_enabled},
           {"size_feedback_enabled", r.size_feedback_enabled}};
  detail::put_opt(j, "pinned_seed", r.pinned_seed);
  detail::put_opt(j, "base_seed", r.base_seed);
}

inline void from_json(const json& j, GenerationRequest& r) {
  r = GenerationRequest{};
  detail::get_to_if(j, "background_ref", r.background_ref);
  detail::get_to_if(j, "product_id", r.product_id);
  r.pinned_seed = detail::get_opt<std::uint64_t>(j, "pinned_seed");
  r.base_seed = detail::get_opt<std::uint64_t>(j, "base_seed");
  detail::get_to_if(j, "config", r.config);
  detail::get_to_if(j, "morph", r.morph);
  detail::get_to_if(j, "filter_enabled", r.filter_enabled);
  detail::get_to_if(j, "size_feedback_enabled", r.size_feedback_enabled);
}

inline void to_json(json& j, const RunEvent& e) {
  j = json{{"kind", e.kind}, {"message", e.message}};
  detail::put_opt(j, "attempt_index", e.attempt_index);
}

inline void from_json(const json& j, RunEvent& e) {
  e = RunEvent{};
  j.at("kind").get_to(e.kind);
  detail::get_to_if(j, "message", e.message);
  e.attempt_index = detail::get_opt<int>(j, "attempt_index");
}

inline void to_json(json& j, const Attempt& a) {
  j = json{{"seed", a.seed}, {"mask_ref", a.mask_ref}, {"image_ref", a.image_ref}, {"report", a.report}};
}

inline void from_json(const json& j, Attempt& a) {
  a.seed = j.at("seed").get<std::uint64_t>();
  a.mask_ref = j.at("mask_ref").get<std::string>();
  a.image_ref = j.at("image_ref").get<std::string>();
  a.report = report_from_json(j.at("report"));
}

inline void to_json(json& j, const GenerationRun& r) {
  j = json{{"run_id", r.run_id},
           {"request", r.request},
           {"base_seed", r.base_seed},
           {"placement", r.placement},
           {"placement_query", r.placement_query},
           {"attempts", r.attempts},
           {"status", r.status}};
  detail::put_opt(j, "accepted_index", r.accepted_index);
  detail::put_opt(j, "preview_index", r.preview_index);
  detail::put_opt(j, "error", r.error);
  if (!r.events.empty()) j["events"] = r.events;
}

inline void from_json(const json& j, GenerationRun& r) {
  r = GenerationRun{};
  j.at("run_id").get_to(r.run_id);
  j.at("request").get_to(r.request);
  detail::get_to_if(j, "base_seed", r.base_seed);
  detail::get_to_if(j, "placement", r.placement);
  detail::get_to_if(j, "placement_query", r.placement_query);
  detail::get_to_if(j, "attempts", r.attempts);
  j.at("status").get_to(r.status);
  r.accepted_index = detail::get_opt<int>(j, "accepted_index");
  r.preview_index = detail::get_opt<int>(j, "preview_index");
  r.error = detail::get_opt<RunEvent>(j, "error");
  detail::get_to_if(j, "events", r.events);
}

}  // namespace vpp
