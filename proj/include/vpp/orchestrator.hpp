// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Generation loop: localize once, then inpaint and gate with fresh seeds
// until an attempt passes the cascade or the attempt budget runs out.

#pragma once

#include <limits>
#include <memory>
#include <random>
#include <string>

#include "vpp/alignment.hpp"
#include "vpp/domain.hpp"
#include "vpp/localization.hpp"
#include "vpp/morphology.hpp"
#include "vpp/providers.hpp"
#include "vpp/storage.hpp"

namespace vpp {

struct AttemptOutcome {
  Image image;
  AlignmentReport report;
};

/// Inpaints once with the rendered product prompt and gates the result
/// (or marks it unfiltered when the filter is off).
inline AttemptOutcome attempt_once(const GenerationRequest& request, const Image& background, const BinaryMask& mask,
                                   std::uint64_t seed, const Providers& providers, const ProductProfile& profile,
                                   const SizePromptSet& prompts = {}) {
  if (mask.area() == 0) throw ContractError("attempt_once: mask is empty");
  if (mask.width() != background.width || mask.height() != background.height) {
    throw ContractError("attempt_once: mask and background dimensions differ");
  }
  Image image;
  try {
    image = providers.inpaint(background, mask, render_prompt(profile), seed);
  } catch (const ProviderError& e) {
    throw e.with_stage("inpaint");
  }
  if (image.width != background.width || image.height != background.height) {
    throw ProviderError(ProviderFailure::malformed, 1, "inpainter changed the image dimensions", "inpaint");
  }
  if (!request.filter_enabled) return {std::move(image), AlignmentReport::unfiltered_pass()};
  auto report = run_cascade(image, profile, providers, request.config, prompts);
  return {std::move(image), std::move(report)};
}

/// Localization followed by the request's initial erosion/dilation.
struct MaskPreview {
  PlacementProposal proposal;
  BinaryMask mask;
};

inline MaskPreview preview_mask(const Image& background, const ProductProfile& profile, const Providers& providers,
                                double segmentation_threshold, const MorphParams& morph) {
  MaskPreview p{propose_placement(background, profile, providers, segmentation_threshold), {}};
  p.mask = apply_morph(p.proposal.mask, morph);
  return p;
}

/// Deterministic id for a request replayed with a known base seed.
inline std::string default_run_id(const GenerationRequest& request, std::uint64_t base_seed) {
  return "run-" + sha256_hex(json(request).dump() + "|" + std::to_string(base_seed)).substr(0, 20);
}

inline std::uint64_t draw_base_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) ^ (static_cast<std::uint64_t>(rd()) << 16)) & 0x7fffffffULL;
}

class Orchestrator {
 public:
  Orchestrator(Providers providers, std::shared_ptr<ArtifactStore> artifacts, SizePromptSet prompts = {})
      : providers_(std::move(providers)), artifacts_(std::move(artifacts)), prompts_(std::move(prompts)) {}

  const Providers& providers() const noexcept { return providers_; }

  /// Runs the full loop. Localization, provider and storage failures end the
  /// run with status `failed` and are recorded on it; only malformed requests
  /// throw.
  GenerationRun generate(const GenerationRequest& request, const ProductProfile& profile,
                         std::string run_id = {}) const {
    validate_config(request.config);
    validate_morph(request.morph);
    if (request.product_id != profile.product_id) throw ContractError("request product_id does not match profile");
    if (!profile.centroid && request.filter_enabled) throw ContractError("product has no centroid");

    GenerationRun run;
    run.request = request;
    run.base_seed = request.pinned_seed ? *request.pinned_seed
                                        : (request.base_seed ? *request.base_seed : draw_base_seed());
    run.run_id = run_id.empty() ? default_run_id(request, run.base_seed) : std::move(run_id);
    run.placement_query = profile.placement_query;

    auto fail = [&run](std::string kind, std::string message, std::optional<int> index) {
      run.status = RunStatus::failed;
      run.error = RunEvent{std::move(kind), std::move(message), index};
      return run;
    };

    const auto background_bytes = artifacts_->get(request.background_ref);
    if (!background_bytes) return fail("storage_failure", "unknown background " + request.background_ref, std::nullopt);
    Image background;
    try {
      background = decode_png(*background_bytes);
    } catch (const Error& e) {
      return fail("storage_failure", e.what(), std::nullopt);
    }

    BinaryMask mask;
    try {
      auto preview = preview_mask(background, profile, providers_, request.config.segmentation_threshold, request.morph);
      run.placement = preview.proposal.location_label;
      mask = std::move(preview.mask);
    } catch (const LocalizationError& e) {
      return fail("localization_failure", e.what(), std::nullopt);
    } catch (const ProviderError& e) {
      return fail("provider_failure", e.with_stage(e.stage().empty() ? "localization" : e.stage()).what(),
                  std::nullopt);
    }
    if (mask.area() == 0) {
      return fail("adjustment_collapse", "initial erosion removed the entire placement mask", std::nullopt);
    }

    const int max_attempts = request.effective_max_attempts();
    for (int i = 0; i < max_attempts; ++i) {
      const std::uint64_t seed = request.pinned_seed ? *request.pinned_seed : run.base_seed + static_cast<std::uint64_t>(i);
      Attempt attempt;
      attempt.seed = seed;
      try {
        attempt.mask_ref = artifacts_->put_mask(mask);
        auto outcome = attempt_once(request, background, mask, seed, providers_, profile, prompts_);
        attempt.image_ref = artifacts_->put_png(outcome.image);
        attempt.report = std::move(outcome.report);
      } catch (const ProviderError& e) {
        return fail("provider_failure", e.what(), i);
      } catch (const StorageError& e) {
        return fail("storage_failure", e.what(), i);
      }
      run.attempts.push_back(std::move(attempt));
      const auto& report = run.attempts.back().report;
      if (report.passed()) {
        run.status = RunStatus::accepted;
        run.accepted_index = i;
        return run;
      }
      if (request.size_feedback_enabled && report.stage_reached() == CascadeStage::volume && i + 1 < max_attempts) {
        try {
          mask = adjust_for_verdict(mask, *report.volume_verdict(), request.morph);
        } catch (const AdjustmentCollapse& e) {
          run.events.push_back(RunEvent{"adjustment_collapse", e.what(), i});
        }
      }
    }
    run.status = RunStatus::exhausted;
    run.preview_index = best_attempt(run);
    return run;
  }

 private:
  /// Highest content probability, then highest quality score.
  static int best_attempt(const GenerationRun& run) {
    int best = 0;
    auto key = [&run](int i) {
      const auto& r = run.attempts[static_cast<std::size_t>(i)].report;
      constexpr double lowest = -std::numeric_limits<double>::infinity();
      return std::pair(r.content_probability().value_or(lowest), r.quality_score().value_or(lowest));
    };
    for (int i = 1; i < static_cast<int>(run.attempts.size()); ++i) {
      if (key(i) > key(best)) best = i;
    }
    return best;
  }

  Providers providers_;
  std::shared_ptr<ArtifactStore> artifacts_;
  SizePromptSet prompts_;
};

}  // namespace vpp
