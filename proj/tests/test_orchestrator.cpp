// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "support.hpp"

using namespace vpp;
using namespace vpp::testing;

namespace {

struct Rig {
  CountedScenario cs;
  std::shared_ptr<MemoryArtifactStore> store = std::make_shared<MemoryArtifactStore>();
  ProductProfile profile;
  GenerationRequest request;

  explicit Rig(const StubScenario& scenario) : cs(counted_scenario(scenario, echo_dot_profile())) {
    profile = registered(echo_dot_profile(), *cs.world);
    request.product_id = profile.product_id;
    request.background_ref = store->put_png(pattern_image(32, 32, 0));
    request.base_seed = 1000;
  }

  GenerationRun run() const { return Orchestrator(cs.providers, store).generate(request, profile); }
};

}  // namespace

TEST(AttemptOnce, AllPassIsOneInpaint) {
  Rig rig(scenarios::all_pass());
  const BinaryMask mask(32, 32, true);
  const auto out = attempt_once(rig.request, pattern_image(32, 32, 0), mask, 5, rig.cs.providers, rig.profile);
  EXPECT_TRUE(out.report.passed());
  EXPECT_FALSE(out.report.unfiltered());
  EXPECT_EQ(rig.cs.counts->inpaint, 1);
}

TEST(AttemptOnce, FilterOffReturnsUnfiltered) {
  Rig rig(scenarios::all_fail());
  rig.request.filter_enabled = false;
  const auto out = attempt_once(rig.request, pattern_image(32, 32, 0), BinaryMask(32, 32, true), 5, rig.cs.providers,
                                rig.profile);
  EXPECT_TRUE(out.report.passed());
  EXPECT_TRUE(out.report.unfiltered());
  EXPECT_EQ(rig.cs.counts->caption, 0);
}

TEST(AttemptOnce, EmptyMaskIsPreconditionError) {
  Rig rig(scenarios::all_pass());
  EXPECT_THROW(attempt_once(rig.request, pattern_image(32, 32, 0), BinaryMask(32, 32), 5, rig.cs.providers, rig.profile),
               ContractError);
  EXPECT_EQ(rig.cs.counts->inpaint, 0);
}

TEST(Generate, FailFailPass) {
  Rig rig(scenarios::fail_then_pass(2));
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::accepted);
  ASSERT_EQ(run.attempts.size(), 3u);
  EXPECT_EQ(run.accepted_index, 2);
  EXPECT_EQ(rig.cs.counts->inpaint, 3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(run.attempts[i].seed, 1000 + i);
  EXPECT_TRUE(run_violations(run).empty());
  EXPECT_EQ(run.placement, "countertop");
}

TEST(Generate, AllFailExhausts) {
  Rig rig(scenarios::all_fail());
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::exhausted);
  EXPECT_EQ(run.attempts.size(), 10u);
  EXPECT_FALSE(run.accepted_index.has_value());
  ASSERT_TRUE(run.preview_index.has_value());
  EXPECT_TRUE(run_violations(run).empty());
}

TEST(Generate, MaxAttemptsHonoured) {
  Rig rig(scenarios::all_fail());
  rig.request.config.max_attempts = 4;
  EXPECT_EQ(rig.run().attempts.size(), 4u);
}

TEST(Generate, PinnedSeedRunsOnce) {
  Rig rig(scenarios::all_fail());
  rig.request.pinned_seed = 42;
  const auto run = rig.run();
  ASSERT_EQ(run.attempts.size(), 1u);
  EXPECT_EQ(run.attempts[0].seed, 42u);
  EXPECT_EQ(run.base_seed, 42u);
  EXPECT_EQ(run.status, RunStatus::exhausted);
}

TEST(Generate, NothingAfterPass) {
  Rig rig(scenarios::all_pass());
  const auto run = rig.run();
  EXPECT_EQ(run.attempts.size(), 1u);
  EXPECT_EQ(rig.cs.counts->inpaint, 1);
}

TEST(Generate, FilterOffAcceptsFirstAttempt) {
  Rig rig(scenarios::all_fail());
  rig.request.filter_enabled = false;
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::accepted);
  ASSERT_EQ(run.attempts.size(), 1u);
  EXPECT_TRUE(run.attempts[0].report.unfiltered());
}

TEST(Generate, PreviewIsBestAttempt) {
  StubScenario s;
  s.attempts = {scenarios::content_fail(), scenarios::quality_fail(), scenarios::content_fail()};
  Rig rig(s);
  rig.request.config.max_attempts = 3;
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::exhausted);
  EXPECT_EQ(run.preview_index, 1);
}

TEST(Generate, MaskComputedOncePerRun) {
  Rig rig(scenarios::all_fail());
  const auto run = rig.run();
  for (const auto& a : run.attempts) EXPECT_EQ(a.mask_ref, run.attempts[0].mask_ref);
  const auto mask = rig.store->get_mask(run.attempts[0].mask_ref);
  // block_fraction default: 16 columns x 13 rows of a 32x32 frame
  EXPECT_EQ(mask.area(), 16u * 13u);
}

TEST(Generate, SizeFeedbackShrinksOversizedMask) {
  StubScenario s;
  s.attempts = {scenarios::volume_fail(VolumeVerdict::too_large), scenarios::passing()};
  Rig rig(s);
  rig.request.size_feedback_enabled = true;
  rig.request.morph.kernel_size = 3;
  rig.request.morph.step_per_adjust = 1;
  const auto run = rig.run();
  ASSERT_EQ(run.attempts.size(), 2u);
  const auto first = rig.store->get_mask(run.attempts[0].mask_ref);
  const auto second = rig.store->get_mask(run.attempts[1].mask_ref);
  EXPECT_EQ(second, brute_erode(first, 3, 1));
  EXPECT_LT(second.area(), first.area());
}

TEST(Generate, SizeFeedbackGrowsUndersizedMask) {
  StubScenario s;
  s.attempts = {scenarios::volume_fail(VolumeVerdict::too_small), scenarios::passing()};
  Rig rig(s);
  rig.request.size_feedback_enabled = true;
  rig.request.morph.step_per_adjust = 1;
  const auto run = rig.run();
  ASSERT_EQ(run.attempts.size(), 2u);
  const auto first = rig.store->get_mask(run.attempts[0].mask_ref);
  EXPECT_EQ(rig.store->get_mask(run.attempts[1].mask_ref), brute_dilate(first, 5, 1));
}

TEST(Generate, SizeFeedbackOffKeepsMask) {
  StubScenario s;
  s.attempts = {scenarios::volume_fail(), scenarios::passing()};
  Rig rig(s);
  const auto run = rig.run();
  ASSERT_EQ(run.attempts.size(), 2u);
  EXPECT_EQ(run.attempts[0].mask_ref, run.attempts[1].mask_ref);
}

TEST(Generate, CollapseIsRecordedAndMaskKept) {
  StubScenario s;
  s.attempts = {scenarios::volume_fail(VolumeVerdict::too_large)};
  Rig rig(s);
  rig.request.config.max_attempts = 3;
  rig.request.size_feedback_enabled = true;
  rig.request.morph.step_per_adjust = 10;
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::exhausted);
  ASSERT_FALSE(run.events.empty());
  EXPECT_EQ(run.events[0].kind, "adjustment_collapse");
  EXPECT_EQ(run.attempts[0].mask_ref, run.attempts[2].mask_ref);
}

TEST(Generate, LocalizationFailureFailsRun) {
  StubScenario s;
  s.heatmap.kind = HeatmapSpec::Kind::uniform;
  s.heatmap.value = 0.1;
  Rig rig(s);
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::failed);
  ASSERT_TRUE(run.error.has_value());
  EXPECT_EQ(run.error->kind, "localization_failure");
  EXPECT_TRUE(run.attempts.empty());
  EXPECT_EQ(rig.cs.counts->inpaint, 0);
}

TEST(Generate, UnknownBackgroundFailsRun) {
  Rig rig(scenarios::all_pass());
  rig.request.background_ref = "sha256:" + std::string(64, '0');
  const auto run = rig.run();
  EXPECT_EQ(run.status, RunStatus::failed);
  EXPECT_EQ(run.error->kind, "storage_failure");
}

TEST(Generate, InvalidRequestThrows) {
  Rig rig(scenarios::all_pass());
  rig.request.config.volume_threshold = 1.2;
  EXPECT_THROW(rig.run(), ConfigError);
  rig.request.config = AlignmentConfig{};
  rig.request.product_id = "other";
  EXPECT_THROW(rig.run(), ContractError);
}

TEST(Generate, DeterministicReplay) {
  const auto once = [] {
    Rig rig(scenarios::fail_then_pass(3));
    return json(rig.run()).dump();
  };
  const auto a = once();
  EXPECT_EQ(a, once());
  const auto parsed = json::parse(a).get<GenerationRun>();
  EXPECT_EQ(json(parsed).dump(), a);
}

TEST(Generate, AcceptedRunsSatisfyThresholds) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> sim(0.15, 0.40);
  std::uniform_real_distribution<double> q(0.55, 0.95);
  int accepted = 0;
  for (int trial = 0; trial < 60; ++trial) {
    StubScenario s;
    s.attempts.clear();
    for (int i = 0; i < 3; ++i) {
      ScriptedAttempt a;
      a.content = {sim(rng), sim(rng)};
      a.quality = q(rng);
      a.volume = {sim(rng), sim(rng), sim(rng)};
      s.attempts.push_back(a);
    }
    Rig rig(s);
    rig.request.config.max_attempts = 3;
    const auto run = rig.run();
    ASSERT_TRUE(run_violations(run).empty());
    if (run.status != RunStatus::accepted) continue;
    ++accepted;
    const auto& r = run.attempts[static_cast<std::size_t>(*run.accepted_index)].report;
    EXPECT_GT(*r.content_probability(), 0.7);
    EXPECT_GT(*r.quality_score(), 0.7);
    EXPECT_GT((*r.volume_distribution())[1], 0.34);
  }
  EXPECT_GT(accepted, 0);
}
