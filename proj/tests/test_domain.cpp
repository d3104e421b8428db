// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"

using namespace vpp;
using namespace vpp::testing;

namespace {

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& v : e.violations()) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const AlignmentConfig c;
  EXPECT_EQ(c.content_threshold, 0.7);
  EXPECT_EQ(c.quality_threshold, 0.7);
  EXPECT_EQ(c.volume_threshold, 0.34);
  EXPECT_EQ(c.segmentation_threshold, 0.7);
  EXPECT_EQ(c.max_attempts, 10);
  EXPECT_EQ(c.logit_scale, 100.0);
  EXPECT_EQ(validate_config(c), c);
}

TEST(Config, ThresholdOutOfRange) {
  AlignmentConfig c;
  c.content_threshold = 1.5;
  try {
    validate_config(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "threshold out of range"));
    EXPECT_TRUE(mentions(e, "content_threshold"));
  }
}

TEST(Config, MaxAttemptsBelowOne) {
  AlignmentConfig c;
  c.max_attempts = 0;
  try {
    validate_config(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "max_attempts < 1"));
  }
}

TEST(Config, ReportsEveryViolation) {
  AlignmentConfig c;
  c.content_threshold = -0.1;
  c.volume_threshold = 2.0;
  c.max_attempts = 0;
  c.logit_scale = 0.0;
  EXPECT_EQ(config_violations(c).size(), 4u);
}

TEST(Config, DefaultsRoundTripThroughJson) {
  const AlignmentConfig c;
  const auto back = json::parse(json(c).dump()).get<AlignmentConfig>();
  EXPECT_EQ(back, c);
  const MorphParams m;
  EXPECT_EQ(json::parse(json(m).dump()).get<MorphParams>(), m);
}

TEST(Prompt, RendersEchoDotPrompt) {
  EXPECT_EQ(render_prompt(echo_dot_profile()), "A photorealistic image of a sks Amazon Alexa device");
}

TEST(Prompt, MissingTokenSlot) {
  auto p = echo_dot_profile();
  p.prompt_template = "A photo of {name}";
  EXPECT_THROW(render_prompt(p), ContractError);
}

TEST(Prompt, Substitution) {
  auto p = echo_dot_profile();
  p.identifier_token = "zxw";
  p.name = "Lupure Vitamin C";
  p.prompt_template = "a photo of {token} {name}";
  EXPECT_EQ(render_prompt(p), "a photo of zxw Lupure Vitamin C");
}

TEST(Prompt, TokenMustAppearOnceInOutput) {
  auto p = echo_dot_profile();
  p.name = "sks speaker";
  EXPECT_THROW(render_prompt(p), ContractError);
}

TEST(Profile, Invariants) {
  auto p = echo_dot_profile();
  EXPECT_TRUE(profile_violations(p).empty());
  p.sample_images.clear();
  EXPECT_FALSE(profile_violations(p).empty());
  p = echo_dot_profile();
  p.identifier_token = "two words";
  EXPECT_FALSE(profile_violations(p).empty());
  p = echo_dot_profile();
  p.centroid = Embedding{0.6, 0.7};
  EXPECT_FALSE(profile_violations(p).empty());
  p.centroid = Embedding{0.6, 0.8};
  EXPECT_TRUE(profile_violations(p).empty());
}

TEST(Profile, JsonRoundTrip) {
  auto p = echo_dot_profile();
  p.centroid = Embedding{0.6, 0.8};
  p.caption_term = CaptionTerm::super_class;
  const auto back = json::parse(json(p).dump()).get<ProductProfile>();
  EXPECT_EQ(json(back), json(p));
}

TEST(Mask, AreaAndDimensions) {
  const auto m = BinaryMask::from_rows({{1, 0, 1}, {0, 0, 1}});
  EXPECT_EQ(m.width(), 3);
  EXPECT_EQ(m.height(), 2);
  EXPECT_EQ(m.size(), 6u);
  EXPECT_EQ(m.area(), 3u);
  EXPECT_EQ(m.complement().area(), 3u);
  EXPECT_THROW(BinaryMask(2, 2, std::vector<std::uint8_t>(3)), ContractError);
}

TEST(Mask, PngRoundTripUses0And255) {
  const auto m = BinaryMask::from_rows({{1, 0}, {0, 1}});
  const auto img = mask_to_image(m);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{255, 0, 0, 255}));
  EXPECT_EQ(decode_mask_png(encode_mask_png(m)), m);
}

TEST(Report, ContentStageCannotCarryLaterScores) {
  AlignmentReport::Fields f;
  f.content_probability = 0.5;
  f.stage_reached = CascadeStage::content;
  f.volume_distribution = VolumeDistribution{0.2, 0.5, 0.3};
  f.volume_verdict = VolumeVerdict::appropriate;
  EXPECT_THROW(AlignmentReport{f}, ContractError);
  f.volume_distribution.reset();
  f.volume_verdict.reset();
  f.quality_score = 0.8;
  EXPECT_THROW(AlignmentReport{f}, ContractError);
  f.quality_score.reset();
  EXPECT_NO_THROW(AlignmentReport{f});
}

TEST(Report, DistributionMustSumToOne) {
  AlignmentReport::Fields f;
  f.content_probability = 0.9;
  f.quality_score = 0.8;
  f.volume_distribution = VolumeDistribution{0.2, 0.5, 0.31};
  f.volume_verdict = VolumeVerdict::appropriate;
  f.stage_reached = CascadeStage::accepted;
  EXPECT_THROW(AlignmentReport{f}, ContractError);
  f.volume_distribution = VolumeDistribution{0.2, 0.5, 0.3};
  const AlignmentReport r(f);
  EXPECT_TRUE(r.passed());
}

TEST(Report, PassedIffAccepted) {
  AlignmentReport::Fields f;
  f.content_probability = 0.9;
  f.quality_score = 0.8;
  f.volume_distribution = VolumeDistribution{0.5, 0.25, 0.25};
  f.volume_verdict = VolumeVerdict::too_small;
  f.stage_reached = CascadeStage::volume;
  EXPECT_FALSE(AlignmentReport(f).passed());
  f.stage_reached = CascadeStage::accepted;
  EXPECT_TRUE(AlignmentReport(f).passed());
  EXPECT_TRUE(AlignmentReport::unfiltered_pass().passed());
  EXPECT_TRUE(AlignmentReport::unfiltered_pass().unfiltered());
}

TEST(Report, JsonRejectsInconsistentPassedFlag) {
  AlignmentReport::Fields f;
  f.content_probability = 0.5;
  auto j = json(AlignmentReport(f));
  EXPECT_EQ(j.at("passed"), false);
  EXPECT_EQ(json(report_from_json(j)), j);
  j["passed"] = true;
  EXPECT_THROW(report_from_json(j), ContractError);
}

TEST(Request, PinnedSeedForcesOneAttempt) {
  GenerationRequest r;
  EXPECT_EQ(r.effective_max_attempts(), 10);
  r.pinned_seed = 42;
  EXPECT_EQ(r.effective_max_attempts(), 1);
  EXPECT_TRUE(r.filter_enabled);
  EXPECT_FALSE(r.size_feedback_enabled);
}

TEST(Run, ViolationsDetectAttemptsAfterPass) {
  GenerationRun run;
  run.request.config.max_attempts = 3;
  Attempt pass;
  Attempt fail;
  AlignmentReport::Fields f;
  f.content_probability = 0.1;
  fail.report = AlignmentReport(f);
  run.attempts = {pass, fail};
  run.status = RunStatus::accepted;
  run.accepted_index = 0;
  EXPECT_FALSE(run_violations(run).empty());
  run.attempts = {fail, pass};
  run.accepted_index = 1;
  EXPECT_TRUE(run_violations(run).empty());
}
