// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 domain failure
// (exhausted or failed run, unreadable input), 2 usage error.

#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vpp/evaluation.hpp"
#include "vpp/service.hpp"
#include "vpp/workspace.hpp"

namespace vpp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public Error {
 public:
  using Error::Error;
};

namespace cli_detail {

inline std::vector<std::filesystem::path> png_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<EvaluationRecord> load_records(const std::string& path) {
  const auto j = json::parse(read_file_text(path));
  return (j.is_array() ? j : j.at("records")).get<std::vector<EvaluationRecord>>();
}

inline std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

inline void print_summary(std::ostream& out, const GenerationRun& run) {
  out << "run " << run.run_id << ": " << json(run.status).get<std::string>() << " after " << run.attempts.size()
      << " attempt(s)\n";
  if (!run.placement.empty()) out << "placement: " << run.placement << "\n";
  for (std::size_t i = 0; i < run.attempts.size(); ++i) {
    const auto& a = run.attempts[i];
    const auto& r = a.report;
    out << "  [" << i << "] seed " << a.seed << "  content " << fmt(r.content_probability()) << "  quality "
        << fmt(r.quality_score()) << "  volume " << fmt(r.volume_appropriate()) << "  "
        << (r.unfiltered() ? std::string("unfiltered") : json(r.stage_reached()).get<std::string>()) << "\n";
  }
  if (run.error) out << "error: " << run.error->kind << ": " << run.error->message << "\n";
  for (const auto& e : run.events) out << "event: " << e.kind << ": " << e.message << "\n";
}

}  // namespace cli_detail

/// Entry point; `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Virtual product placement pipeline", "vpp"};
  app.require_subcommand(1);
  std::string store;
  app.add_option("--store", store, "Storage root (default: $VPP_STORAGE_ROOT, else in-memory)");

  auto options_for = [&store]() {
    auto o = WorkspaceOptions::from_env();
    if (!store.empty()) o.storage_root = store;
    return o;
  };

  // -- register ---------------------------------------------------------------
  auto* reg = app.add_subcommand("register", "Register a product profile with its sample images");
  std::string reg_profile, reg_samples;
  reg->add_option("--profile", reg_profile, "Profile JSON")->required()->check(CLI::ExistingFile);
  reg->add_option("--samples", reg_samples, "Directory of sample PNGs")->required()->check(CLI::ExistingDirectory);

  // -- generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Place a product into a background image");
  std::string image, product, profile_path, samples_dir, scenario_path, out_path = "vpp_output.png", request_path;
  std::uint64_t seed = 0, base_seed = 0;
  int max_attempts = AlignmentConfig{}.max_attempts;
  int erode_n = 0, dilate_n = 0, kernel = MorphParams{}.kernel_size;
  double seg = AlignmentConfig{}.segmentation_threshold, content = AlignmentConfig{}.content_threshold,
         quality = AlignmentConfig{}.quality_threshold, volume = AlignmentConfig{}.volume_threshold;
  bool no_filter = false, size_feedback = false, json_mode = false;
  gen->add_option("--image", image, "Background PNG")->required()->check(CLI::ExistingFile);
  gen->add_option("--product", product, "Product id");
  gen->add_option("--profile", profile_path, "Profile JSON (registered on the fly)")->check(CLI::ExistingFile);
  gen->add_option("--samples", samples_dir, "Sample PNG directory for --profile")->check(CLI::ExistingDirectory);
  auto* seed_opt = gen->add_option("--seed", seed, "Pin the seed (one attempt)");
  auto* base_opt = gen->add_option("--base-seed", base_seed, "Base seed for attempt i = base + i");
  auto* filter_opt = gen->add_flag("--no-filter", no_filter, "Disable the alignment filter");
  auto* feedback_opt = gen->add_flag("--size-feedback", size_feedback, "Adjust the mask after volume failures");
  auto* max_opt = gen->add_option("--max-attempts", max_attempts, "Attempt budget")->capture_default_str();
  auto* erode_opt = gen->add_option("--erode", erode_n, "Initial erosion iterations")->capture_default_str();
  auto* dilate_opt = gen->add_option("--dilate", dilate_n, "Initial dilation iterations")->capture_default_str();
  auto* kernel_opt = gen->add_option("--kernel", kernel, "Morphology kernel size (odd)")->capture_default_str();
  auto* seg_opt = gen->add_option("--seg-threshold", seg, "Segmentation threshold")->capture_default_str();
  auto* content_opt = gen->add_option("--content", content, "Content threshold")->capture_default_str();
  auto* quality_opt = gen->add_option("--quality", quality, "Quality threshold")->capture_default_str();
  auto* volume_opt = gen->add_option("--volume", volume, "Volume threshold")->capture_default_str();
  gen->add_option("--stub-scenario", scenario_path, "Stub scenario JSON (forces stub mode)")->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output image path; run JSON and mask are written beside it")
      ->capture_default_str();
  gen->add_option("--request", request_path, "GenerationRequest JSON file, or - for stdin");
  gen->add_flag("--json", json_mode, "Print the run JSON instead of a summary");

  // -- preview ----------------------------------------------------------------
  auto* prev = app.add_subcommand("preview", "Localization and morphology only; writes the mask");
  std::string prev_image, prev_product, prev_out = "vpp_mask.png";
  double prev_seg = AlignmentConfig{}.segmentation_threshold;
  MorphParams prev_morph;
  prev->add_option("--image", prev_image)->required()->check(CLI::ExistingFile);
  prev->add_option("--product", prev_product)->required();
  prev->add_option("--seg-threshold", prev_seg)->capture_default_str();
  prev->add_option("--erode", prev_morph.erosion_iterations)->capture_default_str();
  prev->add_option("--dilate", prev_morph.dilation_iterations)->capture_default_str();
  prev->add_option("--kernel", prev_morph.kernel_size)->capture_default_str();
  prev->add_option("--out", prev_out)->capture_default_str();

  // -- evaluate ---------------------------------------------------------------
  auto* eval = app.add_subcommand("evaluate", "Aggregate metrics over evaluation records");
  std::string eval_records;
  bool eval_json = false;
  eval->add_option("--records", eval_records)->required()->check(CLI::ExistingFile);
  eval->add_flag("--json", eval_json, "Print the report JSON");

  // -- histogram --------------------------------------------------------------
  auto* hist = app.add_subcommand("histogram", "Score histogram (11 bins) for one condition");
  std::string hist_records, hist_field = "assigned", hist_condition;
  hist->add_option("--records", hist_records)->required()->check(CLI::ExistingFile);
  hist->add_option("--field", hist_field)->check(CLI::IsMember({"assigned", "size"}))->capture_default_str();
  hist->add_option("--condition", hist_condition);

  // -- bundle -----------------------------------------------------------------
  auto* bundle = app.add_subcommand("bundle", "Build a blind scoring bundle");
  std::string bundle_records, bundle_out = "bundle", bundle_images;
  std::uint64_t bundle_seed = 0;
  bundle->add_option("--records", bundle_records)->required()->check(CLI::ExistingFile);
  bundle->add_option("--seed", bundle_seed)->required();
  bundle->add_option("--out", bundle_out, "Output directory")->capture_default_str();
  bundle->add_option("--images-root", bundle_images, "Directory that record image paths are relative to");

  // -- ingest -----------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Join blind scores back to records");
  std::string ingest_manifest, ingest_scores_path, ingest_originals, ingest_out;
  ingest->add_option("--manifest", ingest_manifest)->required()->check(CLI::ExistingFile);
  ingest->add_option("--scores", ingest_scores_path, "CSV name,assigned_score,size_score,success")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--records", ingest_originals, "Original records (for CLIP/MQS)")->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Write records JSON here instead of stdout");

  // -- augment ----------------------------------------------------------------
  auto* aug = app.add_subcommand("augment", "Build a fine-tuning dataset manifest");
  std::string aug_samples, aug_out;
  AugmentationSpec aug_spec;
  aug->add_option("--samples", aug_samples)->required()->check(CLI::ExistingDirectory);
  aug->add_option("--count", aug_spec.target_count)->capture_default_str();
  aug->add_option("--seed", aug_spec.rng_seed)->capture_default_str();
  aug->add_option("--resolution", aug_spec.resolution)->capture_default_str();
  aug->add_option("--out", aug_out, "Directory for images and manifest.json (manifest only on stdout if absent)");

  // -- serve ------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*reg) {
      Workspace ws(options_for());
      std::vector<Bytes> samples;
      for (const auto& p : cli_detail::png_files(reg_samples)) samples.push_back(read_file_bytes(p));
      const auto stored =
          ws.register_product(json::parse(read_file_text(reg_profile)).get<ProductProfile>(), samples);
      out << json{{"product_id", stored.product_id}, {"sample_images", stored.sample_images}}.dump(2) << "\n";
      return kExitOk;
    }

    if (*gen) {
      auto options = options_for();
      std::optional<StubScenario> scenario;
      if (!scenario_path.empty()) {
        scenario = json::parse(read_file_text(scenario_path)).get<StubScenario>();
        options.stub_mode = true;
      }
      Workspace ws(options);

      GenerationRequest request;
      if (!request_path.empty()) {
        const std::string text = request_path == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {})
                                                     : read_file_text(request_path);
        request = json::parse(text).get<GenerationRequest>();
      }
      if (!profile_path.empty()) {
        auto profile = json::parse(read_file_text(profile_path)).get<ProductProfile>();
        if (!product.empty() && product != profile.product_id) {
          throw UsageError("--product does not match the profile's product_id");
        }
        product = profile.product_id;
        if (!ws.product(product)) {
          if (samples_dir.empty()) throw UsageError("--profile needs --samples unless the product is registered");
          std::vector<Bytes> samples;
          for (const auto& p : cli_detail::png_files(samples_dir)) samples.push_back(read_file_bytes(p));
          ws.register_product(profile, samples);
        }
      }
      if (!product.empty()) request.product_id = product;
      if (request.product_id.empty()) throw UsageError("--product or --profile is required");

      const auto bg = read_file_bytes(image);
      decode_png(bg);
      request.background_ref = ws.artifacts().put(bg);
      if (*seed_opt) request.pinned_seed = seed;
      if (*base_opt) request.base_seed = base_seed;
      if (*filter_opt) request.filter_enabled = false;
      if (*feedback_opt) request.size_feedback_enabled = true;
      if (*max_opt) request.config.max_attempts = max_attempts;
      if (*erode_opt) request.morph.erosion_iterations = erode_n;
      if (*dilate_opt) request.morph.dilation_iterations = dilate_n;
      if (*kernel_opt) request.morph.kernel_size = kernel;
      if (*seg_opt) request.config.segmentation_threshold = seg;
      if (*content_opt) request.config.content_threshold = content;
      if (*quality_opt) request.config.quality_threshold = quality;
      if (*volume_opt) request.config.volume_threshold = volume;
      validate_config(request.config);
      validate_morph(request.morph);

      const auto run = ws.generate(request, scenario);
      const auto text = json(run).dump(2);
      const std::optional<int> shown = run.accepted_index ? run.accepted_index : run.preview_index;
      if (shown) {
        const std::filesystem::path dest(out_path);
        if (dest.has_parent_path()) std::filesystem::create_directories(dest.parent_path());
        const auto& a = run.attempts[static_cast<std::size_t>(*shown)];
        write_file_bytes(dest, ws.artifacts().require(a.image_ref));
        auto mask_path = dest;
        mask_path.replace_extension(".mask.png");
        write_file_bytes(mask_path, ws.artifacts().require(a.mask_ref));
        auto json_path = dest;
        json_path.replace_extension(".json");
        write_file_text(json_path, text + "\n");
      }
      if (json_mode) {
        out << text << "\n";
      } else {
        cli_detail::print_summary(out, run);
      }
      return run.status == RunStatus::accepted ? kExitOk : kExitFailure;
    }

    if (*prev) {
      Workspace ws(options_for());
      const auto bg = read_file_bytes(prev_image);
      const auto ref = ws.artifacts().put(bg);
      const auto p = ws.preview(prev_product, ref, prev_seg, prev_morph);
      write_file_bytes(prev_out, encode_mask_png(p.mask));
      out << json{{"placement", p.proposal.location_label}, {"mask_area", p.mask.area()}, {"mask", prev_out}}.dump(2)
          << "\n";
      return kExitOk;
    }

    if (*eval) {
      const auto report = build_report(cli_detail::load_records(eval_records));
      out << (eval_json ? report.dump(2) + "\n" : format_report(report));
      return kExitOk;
    }

    if (*hist) {
      auto records = cli_detail::load_records(hist_records);
      if (!hist_condition.empty()) {
        std::erase_if(records, [&](const EvaluationRecord& r) { return r.condition != hist_condition; });
      }
      const auto bins = score_histogram(records, hist_field == "size" ? ScoreField::size : ScoreField::assigned);
      out << json(bins).dump() << "\n";
      return kExitOk;
    }

    if (*bundle) {
      const auto records = cli_detail::load_records(bundle_records);
      const auto b = make_blind_bundle(records, bundle_seed);
      std::shared_ptr<Workspace> ws;
      auto resolve = [&](const std::string& ref) -> Bytes {
        if (ref.rfind("sha256:", 0) == 0) {
          if (!ws) ws = std::make_shared<Workspace>(options_for());
          return ws->artifacts().require(ref);
        }
        const auto path = std::filesystem::path(bundle_images.empty() ? "." : bundle_images) / ref;
        if (!std::filesystem::exists(path)) throw Error("image not found: " + path.string());
        return read_file_bytes(path);
      };
      write_blind_bundle(b, bundle_out, resolve);
      out << "wrote " << b.entries.size() << " images to " << (std::filesystem::path(bundle_out) / "images").string()
          << "\nmanifest: " << (std::filesystem::path(bundle_out) / "manifest.json").string() << "\n";
      return kExitOk;
    }

    if (*ingest) {
      const auto manifest = json::parse(read_file_text(ingest_manifest)).get<BlindBundle>();
      const auto scores = parse_scores_csv(read_file_text(ingest_scores_path));
      std::vector<EvaluationRecord> originals;
      if (!ingest_originals.empty()) originals = cli_detail::load_records(ingest_originals);
      const auto text = json(ingest_scores(manifest, scores, originals)).dump(1) + "\n";
      if (ingest_out.empty()) {
        out << text;
      } else {
        write_file_text(ingest_out, text);
      }
      return kExitOk;
    }

    if (*aug) {
      std::vector<Image> samples;
      for (const auto& p : cli_detail::png_files(aug_samples)) samples.push_back(load_png(p));
      const bool render = !aug_out.empty();
      const auto dataset = augment(samples, aug_spec, render);
      const auto manifest = json(dataset.manifest).dump(1) + "\n";
      if (render) {
        std::filesystem::create_directories(aug_out);
        for (std::size_t i = 0; i < dataset.images.size(); ++i) {
          write_file_bytes(std::filesystem::path(aug_out) / dataset.manifest[i].file, encode_png(dataset.images[i]));
        }
        write_file_text(std::filesystem::path(aug_out) / "manifest.json", manifest);
        out << "wrote " << dataset.manifest.size() << " images and manifest.json to " << aug_out << "\n";
      } else {
        out << manifest;
      }
      return kExitOk;
    }

    if (*serve) {
      auto ws = std::make_shared<Workspace>(options_for());
      Service service(ws);
      err << "listening on " << host << ":" << port << (ws->options().stub_mode ? " (stub mode)" : "") << "\n";
      service.listen(host, port);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace vpp
