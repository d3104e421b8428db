// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "vpp/domain.hpp"
#include "vpp/providers.hpp"

namespace vpp {

/// No usable placement region: empty VQA answer or nothing above threshold.
class LocalizationError : public Error {
 public:
  using Error::Error;
};

struct PlacementProposal {
  std::string location_label;
  Heatmap heatmap;
  BinaryMask mask;
  double threshold_used = 0.0;
};

namespace detail {

inline std::string trim_lower(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\v\f");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\v\f");
  std::string out(s.substr(first, last - first + 1));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

/// Asks the VQA model the product's placement question; returns the
/// normalized (trimmed, lowercased) answer.
inline std::string find_location(const Image& image, const ProductProfile& profile, const Providers& providers) {
  if (profile.placement_query.empty()) throw ContractError("find_location: placement_query is empty");
  auto label = detail::trim_lower(providers.answer(image, profile.placement_query));
  if (label.empty()) throw LocalizationError("visual QA returned an empty placement answer");
  return label;
}

/// Pixel is inside iff score >= threshold.
inline BinaryMask binarize(const Heatmap& heatmap, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("binarize: threshold outside [0,1]");
  heatmap.validate();
  std::vector<std::uint8_t> bits(heatmap.scores.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = heatmap.scores[i] >= threshold ? 1 : 0;
  }
  return BinaryMask(heatmap.width, heatmap.height, std::move(bits));
}

/// VQA label -> segmentation heatmap -> thresholded mask. Disconnected
/// regions above threshold are all kept.
inline PlacementProposal propose_placement(const Image& image, const ProductProfile& profile,
                                           const Providers& providers, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("propose_placement: threshold outside [0,1]");
  PlacementProposal p;
  p.location_label = find_location(image, profile, providers);
  p.heatmap = providers.heatmap(image, p.location_label);
  if (p.heatmap.width != image.width || p.heatmap.height != image.height) {
    throw ProviderError(ProviderFailure::malformed, 1, "segmenter heatmap dimensions differ from the image");
  }
  p.mask = binarize(p.heatmap, threshold);
  p.threshold_used = threshold;
  if (p.mask.area() == 0) {
    throw LocalizationError("no pixel for '" + p.location_label + "' reached the segmentation threshold");
  }
  return p;
}

}  // namespace vpp
