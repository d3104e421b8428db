// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP/JSON adapters for remote inference endpoints. Images travel as
// base64 PNG, embeddings and heatmaps as JSON float arrays.

#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "httplib.h"
#include "vpp/augmentation.hpp"
#include "vpp/domain.hpp"
#include "vpp/image.hpp"
#include "vpp/providers.hpp"

namespace vpp {

struct EndpointDescriptor {
  std::string url;  // scheme://host:port, optional path prefix
  int timeout_ms = 30000;
  int retries = 2;  // extra calls after the first
  std::size_t dimension = 512;
};

inline void from_json(const json& j, EndpointDescriptor& e) {
  j.at("url").get_to(e.url);
  detail::get_to_if(j, "timeout_ms", e.timeout_ms);
  detail::get_to_if(j, "retries", e.retries);
  detail::get_to_if(j, "dimension", e.dimension);
}

/// POSTs JSON and returns the parsed 2xx body. Transport errors and 5xx are
/// retried up to `retries` times; 4xx is not. Each failure class surfaces as
/// its own ProviderFailure kind with the number of calls made.
class JsonEndpoint {
 public:
  explicit JsonEndpoint(EndpointDescriptor d) : desc_(std::move(d)) {
    if (desc_.url.empty()) throw ConfigError({"url: endpoint URL is empty"});
    if (desc_.timeout_ms <= 0) throw ConfigError({"timeout_ms: must be > 0"});
    if (desc_.retries < 0) throw ConfigError({"retries: must be >= 0"});
    split_url();
  }

  const EndpointDescriptor& descriptor() const noexcept { return desc_; }

  json post(const std::string& path, const json& body) const {
    const std::string payload = body.dump();
    const int budget = desc_.retries + 1;
    ProviderFailure last_kind = ProviderFailure::transport;
    std::string last_message;
    for (int call = 1; call <= budget; ++call) {
      httplib::Client client(base_);
      const auto secs = desc_.timeout_ms / 1000;
      const auto usecs = (desc_.timeout_ms % 1000) * 1000;
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      const auto start = std::chrono::steady_clock::now();
      auto res = client.Post(prefix_ + path, payload, "application/json");
      const auto elapsed =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      if (!res) {
        const bool timed_out = elapsed + 50 >= desc_.timeout_ms;
        last_kind = timed_out ? ProviderFailure::timeout : ProviderFailure::transport;
        last_message = path + ": " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_kind = ProviderFailure::status;
        last_message = path + ": HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw ProviderError(ProviderFailure::status, call, path + ": HTTP " + std::to_string(res->status));
      }
      try {
        return json::parse(res->body);
      } catch (const json::exception&) {
        throw ProviderError(ProviderFailure::malformed, call, path + ": response is not JSON");
      }
    }
    throw ProviderError(last_kind, budget, last_message);
  }

 private:
  void split_url() {
    const auto scheme = desc_.url.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = desc_.url.find('/', host_start);
    base_ = desc_.url.substr(0, slash);
    prefix_ = slash == std::string::npos ? "" : desc_.url.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  EndpointDescriptor desc_;
  std::string base_;
  std::string prefix_;
};

namespace detail {

template <typename T>
T field(const json& body, const char* key, const char* path) {
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw ProviderError(ProviderFailure::malformed, 1, std::string(path) + ": missing or invalid '" + key + "'");
  }
}

inline std::string image_b64(const Image& image) { return base64_encode(encode_png(image)); }

}  // namespace detail

class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(EndpointDescriptor d) : ep_(std::move(d)) {}

  Embedding embed_text(std::string_view text) override {
    return check(ep_.post("/embed_text", {{"text", text}}), "/embed_text");
  }
  Embedding embed_image(const Image& image) override {
    return check(ep_.post("/embed_image", {{"image_b64", detail::image_b64(image)}}), "/embed_image");
  }
  std::size_t dimension() const override { return ep_.descriptor().dimension; }

 private:
  Embedding check(const json& body, const char* path) const {
    auto v = detail::field<Embedding>(body, "vector", path);
    if (v.size() != dimension()) {
      throw ProviderError(ProviderFailure::malformed, 1,
                          std::string(path) + ": vector length " + std::to_string(v.size()) + ", expected " +
                              std::to_string(dimension()));
    }
    if (!is_unit(v)) throw ProviderError(ProviderFailure::malformed, 1, std::string(path) + ": vector is not unit norm");
    return v;
  }

  JsonEndpoint ep_;
};

/// Accepts "heatmap" as rows ([[...], ...]) or a flat row-major array.
class RemoteSegmenter : public Segmenter {
 public:
  explicit RemoteSegmenter(EndpointDescriptor d) : ep_(std::move(d)) {}

  Heatmap heatmap(const Image& image, std::string_view label) override {
    const auto body = ep_.post("/segment", {{"image_b64", detail::image_b64(image)}, {"label", label}});
    Heatmap h{image.width, image.height, {}};
    try {
      const auto& hm = body.at("heatmap");
      if (!hm.empty() && hm.front().is_array()) {
        for (const auto& row : hm) {
          for (const auto& v : row) h.scores.push_back(v.get<double>());
        }
      } else {
        h.scores = hm.get<std::vector<double>>();
      }
    } catch (const json::exception&) {
      throw ProviderError(ProviderFailure::malformed, 1, "/segment: missing or invalid 'heatmap'");
    }
    try {
      h.validate();
    } catch (const Error& e) {
      throw ProviderError(ProviderFailure::malformed, 1, std::string("/segment: ") + e.what());
    }
    return h;
  }

 private:
  JsonEndpoint ep_;
};

class RemoteVisualQA : public VisualQA {
 public:
  explicit RemoteVisualQA(EndpointDescriptor d) : ep_(std::move(d)) {}

  std::string answer(const Image& image, std::string_view question) override {
    const auto body = ep_.post("/vqa", {{"image_b64", detail::image_b64(image)}, {"question", question}});
    return detail::field<std::string>(body, "answer", "/vqa");
  }

 private:
  JsonEndpoint ep_;
};

class RemoteCaptioner : public Captioner {
 public:
  explicit RemoteCaptioner(EndpointDescriptor d) : ep_(std::move(d)) {}

  std::string caption(const Image& image) override {
    auto c = detail::field<std::string>(ep_.post("/caption", {{"image_b64", detail::image_b64(image)}}), "caption",
                                        "/caption");
    if (c.empty()) throw ProviderError(ProviderFailure::malformed, 1, "/caption: empty caption");
    return c;
  }

 private:
  JsonEndpoint ep_;
};

/// `model_ref`, when set, is sent along so one endpoint can serve several
/// fine-tuned models.
class RemoteInpainter : public Inpainter {
 public:
  explicit RemoteInpainter(EndpointDescriptor d, std::string model_ref = {})
      : ep_(std::move(d)), model_ref_(std::move(model_ref)) {}

  Image inpaint(const Image& background, const BinaryMask& mask, std::string_view prompt,
                std::uint64_t seed) override {
    json req{{"image_b64", detail::image_b64(background)},
             {"mask_b64", base64_encode(encode_mask_png(mask))},
             {"prompt", prompt},
             {"seed", seed}};
    if (!model_ref_.empty()) req["model_ref"] = model_ref_;
    const auto b64 = detail::field<std::string>(ep_.post("/inpaint", req), "image_b64", "/inpaint");
    try {
      return decode_png(base64_decode(b64));
    } catch (const Error& e) {
      throw ProviderError(ProviderFailure::malformed, 1, std::string("/inpaint: ") + e.what());
    }
  }

 private:
  JsonEndpoint ep_;
  std::string model_ref_;
};

class RemoteTrainer : public Trainer {
 public:
  explicit RemoteTrainer(EndpointDescriptor d) : ep_(std::move(d)) {}

  TrainingResult submit(const FinetuneJob& job) override {
    const auto body = ep_.post("/finetune", {{"job", job}});
    TrainingResult r;
    r.model_ref = detail::field<std::string>(body, "model_ref", "/finetune");
    r.size_bytes = body.contains("size_bytes") ? detail::field<std::uint64_t>(body, "size_bytes", "/finetune") : 0;
    return r;
  }

 private:
  JsonEndpoint ep_;
};

}  // namespace vpp
