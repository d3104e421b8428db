// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP+JSON service over a Workspace.
//
//   POST /artifacts                 raw bytes or {"b64"} -> {ref}
//   GET  /artifacts/{ref}
//   POST /products                  JSON {profile, samples_b64} or multipart
//   GET  /products/{id}
//   POST /products/{id}/finetune    {augmentation, finetune, wait} -> job
//   GET  /jobs/{id}
//   POST /generate                  GenerationRequest (+ background_b64,
//                                   stub_scenario, async) -> {run_id}
//   GET  /runs/{id}, /runs/{id}/stats
//   POST /masks/preview
//   POST /evaluations, GET /evaluations/{id}
//   GET  /config/schema, /health

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"
#include "vpp/workspace.hpp"

namespace vpp {

/// Slider bounds and defaults shared with clients.
inline json config_schema() {
  const AlignmentConfig c;
  const MorphParams m;
  auto range = [](double lo, double hi, double def, double step) {
    return json{{"type", "number"}, {"minimum", lo}, {"maximum", hi}, {"default", def}, {"step", step}};
  };
  auto count = [](int lo, std::optional<int> hi, int def) {
    json j{{"type", "integer"}, {"minimum", lo}, {"default", def}};
    if (hi) j["maximum"] = *hi;
    return j;
  };
  return json{{"$schema", "https://json-schema.org/draft/2020-12/schema"},
              {"title", "GenerationRequest"},
              {"type", "object"},
              {"properties",
               {{"config",
                 {{"type", "object"},
                  {"properties",
                   {{"content_threshold", range(0, 1, c.content_threshold, 0.01)},
                    {"quality_threshold", range(0, 1, c.quality_threshold, 0.01)},
                    {"volume_threshold", range(0, 1, c.volume_threshold, 0.01)},
                    {"segmentation_threshold", range(0, 1, c.segmentation_threshold, 0.01)},
                    {"max_attempts", count(1, 10, c.max_attempts)},
                    {"logit_scale", {{"type", "number"}, {"exclusiveMinimum", 0}, {"default", c.logit_scale}}}}}}},
                {"morph",
                 {{"type", "object"},
                  {"properties",
                   {{"kernel_size", count(1, std::nullopt, m.kernel_size)},
                    {"erosion_iterations", count(0, std::nullopt, m.erosion_iterations)},
                    {"dilation_iterations", count(0, std::nullopt, m.dilation_iterations)},
                    {"step_per_adjust", count(0, std::nullopt, m.step_per_adjust)}}}}},
                {"pinned_seed", {{"type", "integer"}, {"minimum", 0}}},
                {"base_seed", {{"type", "integer"}, {"minimum", 0}}},
                {"filter_enabled", {{"type", "boolean"}, {"default", true}}},
                {"size_feedback_enabled", {{"type", "boolean"}, {"default", false}}}}}};
}

class Service {
 public:
  explicit Service(std::shared_ptr<Workspace> workspace) : ws_(std::move(workspace)) {
    routes();
    worker_ = std::thread([this] { work(); });
  }

  ~Service() {
    stop();
    {
      std::lock_guard lock(queue_mu_);
      shutting_down_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Workspace& workspace() { return *ws_; }
  httplib::Server& server() { return server_; }

  /// Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    listener_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Blocks serving requests.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (listener_.joinable()) listener_.join();
  }

  /// Blocks until the background queue (async runs, fine-tunes) is empty.
  void wait_idle() {
    std::unique_lock lock(queue_mu_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && busy_ == 0; });
  }

 private:
  // -- plumbing ---------------------------------------------------------------

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_text(httplib::Response& res, int status, const std::string& text) {
    res.status = status;
    res.set_content(text, "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                   const std::vector<std::string>& violations = {}) {
    json body{{"error", kind}, {"message", message}};
    if (!violations.empty()) body["violations"] = violations;
    send(res, status, body);
  }

  /// Maps library exceptions to status codes. `invalid` is the status for
  /// malformed input (400 for registration, 422 elsewhere).
  template <typename F>
  static void guarded(httplib::Response& res, int invalid, F&& fn) {
    try {
      fn();
    } catch (const NotFound& e) {
      fail(res, 404, "not_found", e.what());
    } catch (const Conflict& e) {
      fail(res, 409, "conflict", e.what());
    } catch (const ConfigError& e) {
      fail(res, invalid, "invalid_request", e.what(), e.violations());
    } catch (const json::exception& e) {
      fail(res, invalid, "invalid_request", e.what());
    } catch (const ContractError& e) {
      fail(res, invalid, "invalid_request", e.what());
    } catch (const EvaluationError& e) {
      fail(res, invalid, "invalid_request", e.what());
    } catch (const LocalizationError& e) {
      fail(res, 422, "localization_failure", e.what());
    } catch (const ProviderError& e) {
      fail(res, 502, "provider_failure", e.what());
    } catch (const StorageError& e) {
      fail(res, 500, "storage_failure", e.what());
    } catch (const std::exception& e) {
      fail(res, 500, "internal", e.what());
    }
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  }

  /// Resolves "background_ref" or stores "background_b64".
  std::string background_from(const json& body) {
    if (auto it = body.find("background_b64"); it != body.end()) {
      return ws_->artifacts().put(base64_decode(it->get<std::string>()));
    }
    return body.value("background_ref", std::string());
  }

  static std::optional<StubScenario> scenario_from(const json& body) {
    if (auto it = body.find("stub_scenario"); it != body.end() && !it->is_null()) return it->get<StubScenario>();
    return std::nullopt;
  }

  void enqueue(std::function<void()> task) {
    {
      std::lock_guard lock(queue_mu_);
      queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
  }

  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(queue_mu_);
        queue_cv_.wait(lock, [this] { return shutting_down_ || !queue_.empty(); });
        if (queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
        ++busy_;
      }
      try {
        task();
      } catch (...) {
      }
      {
        std::lock_guard lock(queue_mu_);
        --busy_;
      }
      idle_cv_.notify_all();
    }
  }

  // -- routes -------------------------------------------------------------------

  void routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"ok", true}}); });

    server_.Get("/config/schema",
                [](const httplib::Request&, httplib::Response& res) { send(res, 200, config_schema()); });

    server_.Post("/artifacts", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] {
        Bytes bytes;
        if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0) {
          bytes = base64_decode(json::parse(req.body).at("b64").get<std::string>());
        } else {
          bytes.assign(req.body.begin(), req.body.end());
        }
        if (bytes.empty()) throw ContractError("artifact body is empty");
        send(res, 201, {{"ref", ws_->artifacts().put(bytes)}});
      });
    });

    server_.Get(R"(/artifacts/(sha256:[0-9a-f]{64}))", [this](const httplib::Request& req, httplib::Response& res) {
      auto bytes = ws_->artifacts().get(req.matches[1]);
      if (!bytes) return fail(res, 404, "not_found", "unknown artifact");
      const bool png = bytes->size() > 8 && (*bytes)[0] == 0x89 && (*bytes)[1] == 'P';
      res.set_content(std::string(bytes->begin(), bytes->end()), png ? "image/png" : "application/octet-stream");
    });

    server_.Post("/products", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 400, [&] {
        ProductProfile profile;
        std::vector<Bytes> samples;
        if (req.is_multipart_form_data()) {
          if (!req.has_file("profile")) throw ContractError("multipart upload needs a 'profile' part");
          profile = json::parse(req.get_file_value("profile").content).get<ProductProfile>();
          for (const auto& part : req.get_file_values("samples")) samples.emplace_back(part.content.begin(), part.content.end());
        } else {
          const auto body = parse_body(req);
          profile = body.at("profile").get<ProductProfile>();
          for (const auto& s : body.value("samples_b64", json::array())) samples.push_back(base64_decode(s.get<std::string>()));
        }
        const auto stored = ws_->register_product(profile, samples);
        send(res, 201, {{"product_id", stored.product_id}, {"profile", stored}});
      });
    });

    server_.Get(R"(/products/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] { send(res, 200, ws_->require_product(req.matches[1])); });
    });

    server_.Post(R"(/products/([^/]+)/finetune)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] {
        const auto body = parse_body(req);
        AugmentationSpec spec;
        FinetuneOverrides overrides;
        if (auto it = body.find("augmentation"); it != body.end()) it->get_to(spec);
        if (auto it = body.find("finetune"); it != body.end()) it->get_to(overrides);
        auto rec = ws_->prepare_finetune(req.matches[1], spec, overrides);
        if (rec.status != "queued") return send(res, 200, rec);
        if (body.value("wait", false)) {
          rec = ws_->run_finetune(rec.job_id);
          return send(res, rec.status == "done" ? 200 : 502, rec);
        }
        const auto id = rec.job_id;
        enqueue([this, id] { ws_->run_finetune(id); });
        send(res, 202, rec);
      });
    });

    server_.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] { send(res, 200, ws_->require_job(req.matches[1])); });
    });

    server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] {
        const auto body = parse_body(req);
        auto request = body.get<GenerationRequest>();
        request.background_ref = background_from(body);
        const auto scenario = scenario_from(body);
        validate_config(request.config);
        validate_morph(request.morph);
        ws_->require_product(request.product_id);
        if (!body.value("async", false)) {
          const auto run = ws_->generate(request, scenario);
          return send(res, 201, {{"run_id", run.run_id}, {"status", run.status}});
        }
        const auto id = random_id("run-");
        {
          std::lock_guard lock(pending_mu_);
          pending_[id] = "running";
        }
        enqueue([this, request, scenario, id] {
          std::string outcome = "done";
          try {
            ws_->generate(request, scenario, id);
          } catch (const std::exception& e) {
            outcome = std::string("error: ") + e.what();
          }
          std::lock_guard lock(pending_mu_);
          if (outcome == "done") {
            pending_.erase(id);
          } else {
            pending_[id] = outcome;
          }
        });
        send(res, 202, {{"run_id", id}, {"status", "running"}});
      });
    });

    server_.Get(R"(/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (auto text = ws_->run_text(id)) return send_text(res, 200, *text);
      std::lock_guard lock(pending_mu_);
      if (auto it = pending_.find(id); it != pending_.end()) {
        return send(res, it->second == "running" ? 202 : 500, {{"run_id", id}, {"status", it->second}});
      }
      fail(res, 404, "not_found", "unknown run '" + id + "'");
    });

    server_.Get(R"(/runs/([^/]+)/stats)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] { send(res, 200, ws_->stats(ws_->require_run(req.matches[1]))); });
    });

    server_.Post("/masks/preview", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] {
        const auto body = parse_body(req);
        const auto background = background_from(body);
        if (!ws_->artifacts().contains(background)) throw NotFound("unknown background artifact");
        MorphParams morph;
        if (auto it = body.find("morph"); it != body.end()) it->get_to(morph);
        const double threshold = body.value("segmentation_threshold", AlignmentConfig{}.segmentation_threshold);
        const auto p = ws_->preview(body.at("product_id").get<std::string>(), background, threshold, morph,
                                    scenario_from(body));
        const auto mask_ref = ws_->artifacts().put_mask(p.mask);
        send(res, 200,
             {{"background_ref", background},
              {"placement", p.proposal.location_label},
              {"placement_query", ws_->require_product(body.at("product_id")).placement_query},
              {"segmentation_threshold", threshold},
              {"morph", morph},
              {"mask_ref", mask_ref},
              {"mask_area", p.mask.area()},
              {"area_fraction", area_fraction(p.mask)},
              {"proposal_area", p.proposal.mask.area()}});
      });
    });

    server_.Post("/evaluations", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, 422, [&] {
        const auto body = parse_body(req);
        const json& list = body.is_array() ? body : body.at("records");
        const auto records = list.get<std::vector<EvaluationRecord>>();
        if (records.empty()) throw ContractError("records must be non-empty");
        auto [id, report] = ws_->evaluate(records);
        send(res, 201, report);
      });
    });

    server_.Get(R"(/evaluations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto text = ws_->evaluation_text(req.matches[1])) return send_text(res, 200, *text);
      fail(res, 404, "not_found", "unknown evaluation");
    });
  }

  std::shared_ptr<Workspace> ws_;
  httplib::Server server_;
  std::thread listener_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  int busy_ = 0;
  bool shutting_down_ = false;
  std::thread worker_;

  std::mutex pending_mu_;
  std::map<std::string, std::string> pending_;
};

}  // namespace vpp
