// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Shared test helpers and independent oracles. Nothing here calls into the
// code under test for the value it is checking.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "vpp/vpp.hpp"

namespace vpp::testing {

inline std::filesystem::path fixtures() { return VPP_FIXTURES_DIR; }

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("vpp-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Image solid_image(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

/// Deterministic textured image so different indices give different pixels.
inline Image pattern_image(int w, int h, int variant) {
  Image img = solid_image(w, h, 0, 0, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto* p = img.px(x, y);
      p[0] = static_cast<std::uint8_t>((x * 7 + variant * 31) & 0xff);
      p[1] = static_cast<std::uint8_t>((y * 5 + variant * 17) & 0xff);
      p[2] = static_cast<std::uint8_t>((x * y + variant) & 0xff);
    }
  }
  return img;
}

inline ProductProfile echo_dot_profile() {
  ProductProfile p;
  p.product_id = "echo-dot";
  p.name = "Amazon Alexa";
  p.super_class = "smart speaker";
  p.prompt_template = "A photorealistic image of a {token} {name} device";
  p.sample_images = {"sample-0"};
  return p;
}

// -- morphology oracle -----------------------------------------------------

/// Per-pixel neighbourhood check, one iteration. `outside` is the value
/// assumed for pixels beyond the border.
inline BinaryMask brute_morph_once(const BinaryMask& m, int k, bool erode_op, bool outside = false) {
  const int half = k / 2;
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool all = true;
      bool any = false;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          const bool inside = xx >= 0 && yy >= 0 && xx < m.width() && yy < m.height();
          const bool v = inside ? m.at(xx, yy) : outside;
          all = all && v;
          any = any || v;
        }
      }
      out.set(x, y, erode_op ? all : any);
    }
  }
  return out;
}

inline BinaryMask brute_erode(BinaryMask m, int k, int n, bool outside = false) {
  for (int i = 0; i < n; ++i) m = brute_morph_once(m, k, true, outside);
  return m;
}

inline BinaryMask brute_dilate(BinaryMask m, int k, int n, bool outside = false) {
  for (int i = 0; i < n; ++i) m = brute_morph_once(m, k, false, outside);
  return m;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  BinaryMask m(w, h);
  std::bernoulli_distribution bit(density);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, bit(rng));
  }
  return m;
}

// -- softmax oracle ----------------------------------------------------------

/// Direct exp/sum without the max shift, long double accumulation.
inline std::vector<double> softmax_oracle(const std::vector<double>& sims, double scale) {
  long double total = 0.0L;
  std::vector<long double> e;
  for (double s : sims) {
    e.push_back(std::exp(static_cast<long double>(scale) * s));
    total += e.back();
  }
  std::vector<double> out;
  for (auto v : e) out.push_back(static_cast<double>(v / total));
  return out;
}

// -- counting providers -----------------------------------------------------

struct CallCounts {
  std::atomic<int> embed_image{0}, embed_text{0}, heatmap{0}, answer{0}, caption{0}, inpaint{0};
};

class CountingEmbedder : public Embedder {
 public:
  CountingEmbedder(std::shared_ptr<Embedder> inner, std::shared_ptr<CallCounts> c)
      : inner_(std::move(inner)), c_(std::move(c)) {}
  Embedding embed_image(const Image& i) override {
    ++c_->embed_image;
    return inner_->embed_image(i);
  }
  Embedding embed_text(std::string_view t) override {
    ++c_->embed_text;
    return inner_->embed_text(t);
  }
  std::size_t dimension() const override { return inner_->dimension(); }

 private:
  std::shared_ptr<Embedder> inner_;
  std::shared_ptr<CallCounts> c_;
};

class CountingCaptioner : public Captioner {
 public:
  CountingCaptioner(std::shared_ptr<Captioner> inner, std::shared_ptr<CallCounts> c)
      : inner_(std::move(inner)), c_(std::move(c)) {}
  std::string caption(const Image& i) override {
    ++c_->caption;
    return inner_->caption(i);
  }

 private:
  std::shared_ptr<Captioner> inner_;
  std::shared_ptr<CallCounts> c_;
};

class CountingInpainter : public Inpainter {
 public:
  CountingInpainter(std::shared_ptr<Inpainter> inner, std::shared_ptr<CallCounts> c)
      : inner_(std::move(inner)), c_(std::move(c)) {}
  Image inpaint(const Image& b, const BinaryMask& m, std::string_view p, std::uint64_t s) override {
    ++c_->inpaint;
    return inner_->inpaint(b, m, p, s);
  }

 private:
  std::shared_ptr<Inpainter> inner_;
  std::shared_ptr<CallCounts> c_;
};

/// Scenario-backed providers with call counting on the embedder, captioner
/// and inpainter.
struct CountedScenario {
  std::shared_ptr<ScenarioWorld> world;
  Providers providers;
  std::shared_ptr<CallCounts> counts;
};

inline CountedScenario counted_scenario(const StubScenario& scenario, const ProductProfile& profile) {
  CountedScenario out;
  out.world = std::make_shared<ScenarioWorld>(scenario, profile);
  out.counts = std::make_shared<CallCounts>();
  out.providers = Providers(
      std::make_shared<CountingEmbedder>(std::make_shared<ScenarioEmbedder>(out.world), out.counts),
      std::make_shared<StubSegmenter>(out.world->scenario().heatmap.function()),
      std::make_shared<StubVisualQA>(out.world->scenario().vqa_answer),
      std::make_shared<CountingCaptioner>(std::make_shared<ScenarioCaptioner>(out.world), out.counts),
      std::make_shared<CountingInpainter>(std::make_shared<ScenarioInpainter>(out.world), out.counts));
  return out;
}

/// Profile with the scenario world's centroid, ready for the orchestrator.
inline ProductProfile registered(ProductProfile p, const ScenarioWorld& world) {
  p.centroid = world.product_direction();
  return p;
}

/// Runs the CLI binary; returns the exit code and captured stdout.
inline std::pair<int, std::string> run_binary(const std::string& args) {
  const std::string cmd = std::string(VPP_CLI_PATH) + " " + args + " 2>/dev/null";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return {-1, out};
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

}  // namespace vpp::testing
