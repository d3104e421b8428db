// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Persistent pipeline state shared by the HTTP service and the CLI:
// product registration, generation runs, the run ledger, fine-tune jobs and
// the model registry. Both front ends serialize the same records.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vpp/alignment.hpp"
#include "vpp/augmentation.hpp"
#include "vpp/domain.hpp"
#include "vpp/evaluation.hpp"
#include "vpp/orchestrator.hpp"
#include "vpp/remote.hpp"
#include "vpp/storage.hpp"
#include "vpp/stub_scenario.hpp"

namespace vpp {

class NotFound : public Error {
 public:
  using Error::Error;
};

/// Request conflicts with stored state (duplicate id, missing model).
class Conflict : public Error {
 public:
  using Error::Error;
};

struct EndpointSet {
  std::optional<EndpointDescriptor> embedder, segmenter, vqa, captioner, inpainter, trainer;

  bool complete() const { return embedder && segmenter && vqa && captioner && inpainter; }
};

struct WorkspaceOptions {
  /// Filesystem root for artifacts and documents; in-memory when empty.
  std::filesystem::path storage_root;
  bool stub_mode = true;
  StubScenario default_scenario;
  EndpointSet endpoints;
  SizePromptSet size_prompts;

  /// Reads VPP_STORAGE_ROOT, VPP_STUB_MODE, VPP_STUB_SCENARIO,
  /// VPP_{EMBEDDER,SEGMENTER,VQA,CAPTIONER,INPAINTER,TRAINER}_URL and
  /// VPP_TIMEOUT_MS. Stub mode defaults to on unless all five model
  /// endpoints are configured.
  static WorkspaceOptions from_env(const std::function<const char*(const char*)>& getenv = std::getenv) {
    WorkspaceOptions o;
    if (const char* root = getenv("VPP_STORAGE_ROOT"); root && *root) o.storage_root = root;
    int timeout = 30000;
    if (const char* t = getenv("VPP_TIMEOUT_MS"); t && *t) timeout = std::stoi(t);
    auto endpoint = [&](const char* var) -> std::optional<EndpointDescriptor> {
      const char* url = getenv(var);
      if (!url || !*url) return std::nullopt;
      EndpointDescriptor d;
      d.url = url;
      d.timeout_ms = timeout;
      return d;
    };
    o.endpoints.embedder = endpoint("VPP_EMBEDDER_URL");
    o.endpoints.segmenter = endpoint("VPP_SEGMENTER_URL");
    o.endpoints.vqa = endpoint("VPP_VQA_URL");
    o.endpoints.captioner = endpoint("VPP_CAPTIONER_URL");
    o.endpoints.inpainter = endpoint("VPP_INPAINTER_URL");
    o.endpoints.trainer = endpoint("VPP_TRAINER_URL");
    o.stub_mode = !o.endpoints.complete();
    if (const char* s = getenv("VPP_STUB_MODE"); s && *s) {
      const std::string v = s;
      o.stub_mode = !(v == "0" || v == "false" || v == "off");
    }
    if (const char* path = getenv("VPP_STUB_SCENARIO"); path && *path) {
      o.default_scenario = json::parse(read_file_text(path)).get<StubScenario>();
    }
    return o;
  }
};

/// Stats view of a run: the accepted attempt, or the rejected preview of an
/// exhausted run.
struct RunStats {
  std::uint64_t seed = 0;
  std::string placement;
  std::string generated_caption;
  std::string modified_caption;
  std::optional<double> content, quality, volume;
  std::string mask_ref;
  std::size_t mask_area = 0;
};

inline void to_json(json& j, const RunStats& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j = json{{"seed", s.seed},
           {"placement", s.placement},
           {"generated_caption", s.generated_caption},
           {"modified_caption", s.modified_caption},
           {"scores", {{"content", opt(s.content)}, {"quality", opt(s.quality)}, {"volume", opt(s.volume)}}},
           {"mask_ref", s.mask_ref},
           {"mask_area", s.mask_area}};
}

struct JobRecord {
  std::string job_id;
  std::string status;  // queued | running | done | failed
  FinetuneJob job;
  std::optional<std::string> model_ref;
  std::optional<std::uint64_t> size_bytes;
  std::optional<std::string> error;
  std::vector<std::string> history;
};

inline void to_json(json& j, const JobRecord& r) {
  j = json{{"job_id", r.job_id}, {"status", r.status}, {"job", r.job}, {"history", r.history}};
  detail::put_opt(j, "model_ref", r.model_ref);
  detail::put_opt(j, "size_bytes", r.size_bytes);
  detail::put_opt(j, "error", r.error);
}

inline void from_json(const json& j, JobRecord& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("status").get_to(r.status);
  j.at("job").get_to(r.job);
  r.model_ref = detail::get_opt<std::string>(j, "model_ref");
  r.size_bytes = detail::get_opt<std::uint64_t>(j, "size_bytes");
  r.error = detail::get_opt<std::string>(j, "error");
  detail::get_to_if(j, "history", r.history);
}

inline std::string random_id(const std::string& prefix) {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}() ^ (static_cast<std::uint64_t>(std::random_device{}()) << 32)};
  std::lock_guard lock(mu);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return prefix + buf;
}

inline std::string utc_now() {
  const auto t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Workspace {
 public:
  explicit Workspace(WorkspaceOptions options, std::shared_ptr<Trainer> trainer = nullptr)
      : options_(std::move(options)) {
    if (options_.storage_root.empty()) {
      artifacts_ = std::make_shared<MemoryArtifactStore>();
      docs_ = std::make_shared<MemoryDocumentStore>();
    } else {
      artifacts_ = std::make_shared<FilesystemArtifactStore>(options_.storage_root / "artifacts");
      docs_ = std::make_shared<FilesystemDocumentStore>(options_.storage_root / "docs");
    }
    registry_ = std::make_unique<ModelRegistry>(docs_);
    options_.default_scenario.validate();
    if (!options_.stub_mode && !options_.endpoints.complete()) {
      throw ConfigError({"endpoints: stub mode is off but not every model endpoint URL is set"});
    }
    if (trainer) {
      trainer_ = std::move(trainer);
    } else if (options_.endpoints.trainer) {
      trainer_ = std::make_shared<RemoteTrainer>(*options_.endpoints.trainer);
    } else {
      trainer_ = std::make_shared<StubTrainer>();
    }
  }

  const WorkspaceOptions& options() const noexcept { return options_; }
  ArtifactStore& artifacts() const { return *artifacts_; }
  std::shared_ptr<ArtifactStore> artifact_store() const { return artifacts_; }
  DocumentStore& documents() const { return *docs_; }
  ModelRegistry& registry() const { return *registry_; }

  // -- products --------------------------------------------------------------

  /// Stores the samples, computes the centroid over their embeddings and
  /// persists the profile. Throws ConfigError for an invalid profile and
  /// Conflict for a duplicate id.
  ProductProfile register_product(ProductProfile profile, std::span<const Bytes> samples) {
    if (samples.empty()) throw ConfigError({"sample_images: at least one sample image is required"});
    std::vector<Image> images;
    for (const auto& bytes : samples) images.push_back(decode_png(bytes));
    profile.sample_images.clear();
    for (const auto& bytes : samples) profile.sample_images.push_back(artifacts_->put(bytes));
    profile.centroid.reset();
    validate_profile(profile);
    render_prompt(profile);

    auto providers = base_providers(profile, std::nullopt);
    std::vector<Embedding> embeddings;
    for (const auto& img : images) embeddings.push_back(providers.embed_image(img));
    profile.centroid = compute_centroid(embeddings);

    std::lock_guard lock(products_mu_);
    if (docs_->get(kProducts, profile.product_id)) {
      throw Conflict("product '" + profile.product_id + "' already exists");
    }
    docs_->insert(kProducts, profile.product_id, json(profile).dump());
    return profile;
  }

  std::optional<ProductProfile> product(const std::string& id) const {
    auto j = docs_->get_json(kProducts, id);
    if (!j) return std::nullopt;
    return j->get<ProductProfile>();
  }

  ProductProfile require_product(const std::string& id) const {
    auto p = product(id);
    if (!p) throw NotFound("unknown product '" + id + "'");
    return *p;
  }

  // -- generation -------------------------------------------------------------

  /// Runs and persists one generation. `scenario` overrides the default
  /// stub scenario (stub mode only).
  GenerationRun generate(const GenerationRequest& request, const std::optional<StubScenario>& scenario = std::nullopt,
                         std::string run_id = {}) {
    validate_config(request.config);
    validate_morph(request.morph);
    const auto profile = require_product(request.product_id);
    std::string model_ref;
    if (!options_.stub_mode) {
      auto model = registry_->active(profile.product_id);
      if (!model) throw Conflict("product '" + profile.product_id + "' has no fine-tuned model");
      model_ref = model->model_ref;
    } else if (scenario && profile.centroid && scenario->dimension != profile.centroid->size()) {
      throw ConfigError({"stub_scenario.dimension: must match the product embedding dimension"});
    }
    if (!artifacts_->contains(request.background_ref)) {
      throw NotFound("unknown background artifact " + request.background_ref);
    }
    Orchestrator orch(run_providers(profile, scenario, model_ref), artifacts_, options_.size_prompts);
    auto run = orch.generate(request, profile, run_id.empty() ? random_id("run-") : std::move(run_id));
    docs_->insert(kRuns, run.run_id, json(run).dump());
    return run;
  }

  std::optional<std::string> run_text(const std::string& run_id) const { return docs_->get(kRuns, run_id); }

  GenerationRun require_run(const std::string& run_id) const {
    auto j = docs_->get_json(kRuns, run_id);
    if (!j) throw NotFound("unknown run '" + run_id + "'");
    return j->get<GenerationRun>();
  }

  std::vector<std::string> run_ids() const { return docs_->ids(kRuns); }

  RunStats stats(const GenerationRun& run) const {
    std::optional<int> index = run.accepted_index ? run.accepted_index : run.preview_index;
    if (!index) throw Conflict("run '" + run.run_id + "' has no attempt to show");
    const auto& attempt = run.attempts.at(static_cast<std::size_t>(*index));
    const auto& r = attempt.report;
    RunStats s;
    s.seed = attempt.seed;
    s.placement = run.placement;
    s.generated_caption = r.caption();
    s.modified_caption = r.modified_caption();
    s.content = r.content_probability();
    s.quality = r.quality_score();
    s.volume = r.volume_appropriate();
    s.mask_ref = attempt.mask_ref;
    s.mask_area = artifacts_->get_mask(attempt.mask_ref).area();
    return s;
  }

  /// Localization plus initial morphology only; no inpainting.
  MaskPreview preview(const std::string& product_id, const std::string& background_ref, double threshold,
                      const MorphParams& morph, const std::optional<StubScenario>& scenario = std::nullopt) const {
    validate_morph(morph);
    AlignmentConfig c;
    c.segmentation_threshold = threshold;
    validate_config(c);
    const auto profile = require_product(product_id);
    const auto background = artifacts_->get_png(background_ref);
    return preview_mask(background, profile, run_providers(profile, scenario, {}), threshold, morph);
  }

  /// Referential integrity over the ledger: every artifact referenced by a
  /// persisted run or product exists. Returns one line per dangling ref.
  std::vector<std::string> integrity_sweep() const {
    std::vector<std::string> problems;
    auto check = [&](const std::string& owner, const std::string& ref) {
      if (!artifacts_->contains(ref)) problems.push_back(owner + ": missing artifact " + ref);
    };
    for (const auto& id : docs_->ids(kRuns)) {
      GenerationRun run;
      try {
        run = docs_->get_json(kRuns, id)->get<GenerationRun>();
      } catch (const std::exception& e) {
        problems.push_back("runs/" + id + ": unreadable (" + e.what() + ")");
        continue;
      }
      if (run.run_id != id) problems.push_back("runs/" + id + ": run_id mismatch");
      for (const auto& v : run_violations(run)) problems.push_back("runs/" + id + ": " + v);
      check("runs/" + id, run.request.background_ref);
      for (const auto& a : run.attempts) {
        check("runs/" + id, a.mask_ref);
        check("runs/" + id, a.image_ref);
      }
    }
    for (const auto& id : docs_->ids(kProducts)) {
      for (const auto& ref : docs_->get_json(kProducts, id)->get<ProductProfile>().sample_images) {
        check("products/" + id, ref);
      }
    }
    return problems;
  }

  // -- fine-tuning ------------------------------------------------------------

  /// Augments the product samples, stores the dataset and returns the queued
  /// job record. A job whose id already exists and has not failed is
  /// returned as is (submission dedup).
  JobRecord prepare_finetune(const std::string& product_id, const AugmentationSpec& spec,
                             const FinetuneOverrides& overrides) {
    validate_augmentation(spec);
    const auto profile = require_product(product_id);
    std::vector<Image> samples;
    for (const auto& ref : profile.sample_images) samples.push_back(artifacts_->get_png(ref));
    const auto dataset = augment(samples, spec);
    json rows = json::array();
    for (std::size_t i = 0; i < dataset.manifest.size(); ++i) {
      json row = dataset.manifest[i];
      row["ref"] = artifacts_->put_png(dataset.images[i]);
      rows.push_back(std::move(row));
    }
    const auto manifest = json{{"product_id", product_id}, {"spec", spec}, {"rows", rows}}.dump();
    const auto dataset_ref = artifacts_->put(std::span(reinterpret_cast<const std::uint8_t*>(manifest.data()),
                                                       manifest.size()));
    JobRecord rec;
    rec.job = build_finetune_job(profile, dataset_ref, dataset.manifest.size(), overrides);
    rec.job_id = rec.job.job_id;
    std::lock_guard lock(jobs_mu_);
    if (auto existing = docs_->get_json(kJobs, rec.job_id)) {
      auto prev = existing->get<JobRecord>();
      if (prev.status != "failed") return prev;
      rec.history = prev.history;
    }
    rec.status = "queued";
    rec.history.push_back("queued");
    docs_->upsert(kJobs, rec.job_id, json(rec).dump());
    return rec;
  }

  /// Moves a queued job through running to done or failed. On success the
  /// model registry gains exactly one entry.
  JobRecord run_finetune(const std::string& job_id) {
    auto rec = require_job(job_id);
    if (rec.status != "queued") return rec;
    set_status(rec, "running");
    try {
      const auto result = trainer_->submit(rec.job);
      if (result.size_bytes == 0) {
        throw ProviderError(ProviderFailure::malformed, 1, "training endpoint did not report a model size");
      }
      registry_->record({rec.job.product_id, result.model_ref, result.size_bytes, utc_now(), rec.job_id});
      rec.model_ref = result.model_ref;
      rec.size_bytes = result.size_bytes;
      rec.error.reset();
      set_status(rec, "done");
    } catch (const std::exception& e) {
      rec.error = e.what();
      set_status(rec, "failed");
    }
    return rec;
  }

  JobRecord require_job(const std::string& job_id) const {
    auto j = docs_->get_json(kJobs, job_id);
    if (!j) throw NotFound("unknown job '" + job_id + "'");
    return j->get<JobRecord>();
  }

  // -- evaluations -------------------------------------------------------------

  std::pair<std::string, json> evaluate(const std::vector<EvaluationRecord>& records) {
    auto report = build_report(records);
    const std::string id = "eval-" + sha256_hex(json(records).dump()).substr(0, 20);
    report["evaluation_id"] = id;
    docs_->insert(kEvaluations, id, report.dump());
    return {id, report};
  }

  std::optional<std::string> evaluation_text(const std::string& id) const { return docs_->get(kEvaluations, id); }

  // -- providers ----------------------------------------------------------------

  /// Providers for a run: a fresh scenario world in stub mode (so seed
  /// bookkeeping is per run), remote adapters otherwise.
  Providers run_providers(const ProductProfile& profile, const std::optional<StubScenario>& scenario,
                          const std::string& model_ref) const {
    if (options_.stub_mode) {
      return make_scenario_providers(scenario ? *scenario : options_.default_scenario, profile, options_.size_prompts)
          .providers;
    }
    const auto& e = options_.endpoints;
    return Providers(std::make_shared<RemoteEmbedder>(*e.embedder), std::make_shared<RemoteSegmenter>(*e.segmenter),
                     std::make_shared<RemoteVisualQA>(*e.vqa), std::make_shared<RemoteCaptioner>(*e.captioner),
                     std::make_shared<RemoteInpainter>(*e.inpainter, model_ref));
  }

 private:
  Providers base_providers(const ProductProfile& profile, const std::optional<StubScenario>& scenario) const {
    return run_providers(profile, scenario, {});
  }

  void set_status(JobRecord& rec, const std::string& status) {
    std::lock_guard lock(jobs_mu_);
    rec.status = status;
    rec.history.push_back(status);
    docs_->upsert(kJobs, rec.job_id, json(rec).dump());
  }

  static constexpr const char* kProducts = "products";
  static constexpr const char* kRuns = "runs";
  static constexpr const char* kJobs = "jobs";
  static constexpr const char* kEvaluations = "evaluations";

  WorkspaceOptions options_;
  std::shared_ptr<ArtifactStore> artifacts_;
  std::shared_ptr<DocumentStore> docs_;
  std::unique_ptr<ModelRegistry> registry_;
  std::shared_ptr<Trainer> trainer_;
  std::mutex products_mu_;
  std::mutex jobs_mu_;
};

}  // namespace vpp
