// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Evaluation harness: blind bundles for human scoring, score ingestion and
// the aggregate metrics (FR, CLIP, MAQS, MASS, MQS).
//
// Standard deviations use the population convention (divide by n).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vpp/domain.hpp"
#include "vpp/image.hpp"
#include "vpp/providers.hpp"

namespace vpp {

class EvaluationError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kNaive = "naive";
inline constexpr const char* kAlignment = "alignment";
inline constexpr const char* kPbeFixture = "pbe-fixture";

struct EvaluationRecord {
  std::string image;
  std::string condition;
  std::optional<int> assigned_score;
  std::optional<int> size_score;
  bool success = false;
  std::optional<double> clip_score;
  std::optional<double> mqs;
};

inline void check_record(const EvaluationRecord& r) {
  auto in_range = [](const std::optional<int>& s) { return !s || (*s >= 0 && *s <= 10); };
  if (r.image.empty()) throw EvaluationError("record without image ref");
  if (r.condition != kNaive && r.condition != kAlignment && r.condition != kPbeFixture) {
    throw EvaluationError("unknown condition '" + r.condition + "'");
  }
  if (!in_range(r.assigned_score) || !in_range(r.size_score)) {
    throw EvaluationError("score outside 0-10 for " + r.image);
  }
}

inline void to_json(json& j, const EvaluationRecord& r) {
  j = json{{"image", r.image}, {"condition", r.condition}, {"success", r.success}};
  detail::put_opt(j, "assigned_score", r.assigned_score);
  detail::put_opt(j, "size_score", r.size_score);
  detail::put_opt(j, "clip_score", r.clip_score);
  detail::put_opt(j, "mqs", r.mqs);
}

inline void from_json(const json& j, EvaluationRecord& r) {
  r = EvaluationRecord{};
  j.at("image").get_to(r.image);
  j.at("condition").get_to(r.condition);
  detail::get_to_if(j, "success", r.success);
  r.assigned_score = detail::get_opt<int>(j, "assigned_score");
  r.size_score = detail::get_opt<int>(j, "size_score");
  r.clip_score = detail::get_opt<double>(j, "clip_score");
  r.mqs = detail::get_opt<double>(j, "mqs");
  check_record(r);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// 100 x failure / success, rounded to two decimals.
inline double failure_rate(long success_count, long failure_count) {
  if (success_count < 0 || failure_count < 0) throw EvaluationError("counts must be non-negative");
  if (failure_count == 0) return 0.0;
  if (success_count == 0) throw EvaluationError("failure rate undefined with zero successes");
  return std::round(10000.0 * static_cast<double>(failure_count) / static_cast<double>(success_count)) / 100.0;
}

inline std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", value);
  return buf;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw EvaluationError("mean_std of an empty list");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n), values.size()};
}

struct ConditionReport {
  std::string condition;
  std::size_t records = 0;
  std::size_t success = 0;
  std::size_t failure = 0;
  std::optional<double> fr;
  std::optional<MeanStd> clip;
  std::optional<MeanStd> clip_success_only;
  std::optional<MeanStd> maqs;
  std::optional<MeanStd> mass;
  std::optional<MeanStd> mqs;
  std::optional<MeanStd> mqs_success_only;
};

/// Statistics over the records of one condition. Each statistic uses the
/// records where its field is present; MASS additionally skips records
/// without the product. FR is left empty when undefined (no successes).
inline ConditionReport aggregate(std::span<const EvaluationRecord> records, const std::string& condition) {
  ConditionReport r;
  r.condition = condition;
  std::vector<double> clip, clip_ok, maqs, mass, mqs, mqs_ok;
  for (const auto& rec : records) {
    if (rec.condition != condition) continue;
    ++r.records;
    (rec.success ? r.success : r.failure)++;
    if (rec.clip_score) {
      clip.push_back(*rec.clip_score);
      if (rec.success) clip_ok.push_back(*rec.clip_score);
    }
    if (rec.assigned_score) maqs.push_back(*rec.assigned_score);
    if (rec.size_score && rec.success) mass.push_back(*rec.size_score);
    if (rec.mqs) {
      mqs.push_back(*rec.mqs);
      if (rec.success) mqs_ok.push_back(*rec.mqs);
    }
  }
  if (r.records == 0) throw EvaluationError("no records for condition '" + condition + "'");
  if (r.success > 0 || r.failure == 0) r.fr = failure_rate(static_cast<long>(r.success), static_cast<long>(r.failure));
  auto stat = [](const std::vector<double>& v) -> std::optional<MeanStd> {
    if (v.empty()) return std::nullopt;
    return mean_std(v);
  };
  r.clip = stat(clip);
  r.clip_success_only = stat(clip_ok);
  r.maqs = stat(maqs);
  r.mass = stat(mass);
  r.mqs = stat(mqs);
  r.mqs_success_only = stat(mqs_ok);
  return r;
}

inline void to_json(json& j, const MeanStd& m) { j = json{{"mean", m.mean}, {"std", m.std}, {"n", m.n}}; }

inline void to_json(json& j, const ConditionReport& r) {
  j = json{{"records", r.records}, {"success", r.success}, {"failure", r.failure}};
  j["FR"] = r.fr ? json(*r.fr) : json(nullptr);
  j["FR_text"] = r.fr ? json(format_percent(*r.fr)) : json("undefined");
  auto put = [&j](const char* key, const std::optional<MeanStd>& m) { j[key] = m ? json(*m) : json(nullptr); };
  put("CLIP", r.clip);
  put("CLIP_success_only", r.clip_success_only);
  put("MAQS", r.maqs);
  put("MASS", r.mass);
  put("MQS", r.mqs);
  put("MQS_success_only", r.mqs_success_only);
}

/// One column per condition present in `records`, naive first.
inline json build_report(std::span<const EvaluationRecord> records) {
  if (records.empty()) throw EvaluationError("no records");
  std::vector<std::string> order;
  for (const char* c : {kNaive, kAlignment, kPbeFixture}) {
    if (std::any_of(records.begin(), records.end(), [c](const auto& r) { return r.condition == c; })) {
      order.emplace_back(c);
    }
  }
  json columns = json::object();
  for (const auto& c : order) columns[c] = aggregate(records, c);
  return json{{"std_convention", "population"}, {"condition_order", order}, {"conditions", columns}};
}

inline std::string format_mean_std(const json& m) {
  if (m.is_null()) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f +- %.2f", m.at("mean").get<double>(), m.at("std").get<double>());
  return buf;
}

/// Plain-text rendering of build_report() output, one row per metric.
inline std::string format_report(const json& report) {
  const auto& cols = report.at("conditions");
  std::vector<std::string> order;
  if (auto it = report.find("condition_order"); it != report.end()) {
    order = it->get<std::vector<std::string>>();
  } else {
    for (const auto& item : cols.items()) order.push_back(item.key());
  }
  std::ostringstream out;
  auto cell = [&out](const std::string& text, int width) {
    out << text;
    for (int pad = width - static_cast<int>(text.size()); pad > 0; --pad) out << ' ';
  };
  auto row = [&](const std::string& label, const std::function<std::string(const json&)>& value) {
    cell(label, 10);
    for (const auto& name : order) cell(value(cols.at(name)), 20);
    out << "\n";
  };
  cell("", 10);
  for (const auto& name : order) cell(name, 20);
  out << "\n";
  row("Success", [](const json& c) { return std::to_string(c.at("success").get<std::size_t>()); });
  row("Failure", [](const json& c) { return std::to_string(c.at("failure").get<std::size_t>()); });
  row("FR", [](const json& c) { return c.at("FR_text").get<std::string>(); });
  row("CLIP", [](const json& c) { return format_mean_std(c.at("CLIP")); });
  row("MAQS", [](const json& c) { return format_mean_std(c.at("MAQS")); });
  row("MASS", [](const json& c) { return format_mean_std(c.at("MASS")); });
  row("MQS", [](const json& c) { return format_mean_std(c.at("MQS")); });
  return out.str();
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

enum class ScoreField { assigned, size };

inline std::array<int, 11> score_histogram(std::span<const EvaluationRecord> records, ScoreField field) {
  std::array<int, 11> bins{};
  for (const auto& r : records) {
    const auto& s = field == ScoreField::assigned ? r.assigned_score : r.size_score;
    if (s && *s >= 0 && *s <= 10) ++bins[static_cast<std::size_t>(*s)];
  }
  return bins;
}

inline double histogram_mean(const std::array<int, 11>& bins) {
  long n = 0;
  long sum = 0;
  for (int b = 0; b <= 10; ++b) {
    n += bins[static_cast<std::size_t>(b)];
    sum += static_cast<long>(b) * bins[static_cast<std::size_t>(b)];
  }
  if (n == 0) throw EvaluationError("histogram is empty");
  return static_cast<double>(sum) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Blind bundles
// ---------------------------------------------------------------------------

struct BlindEntry {
  std::string name;
  std::string original_ref;
  std::string condition;
};

/// Renamed image set. Names are fixed-length draws from one alphabet plus
/// the original file extension, so they carry no condition information.
struct BlindBundle {
  std::vector<BlindEntry> entries;  // sorted by name

  const BlindEntry* find(const std::string& name) const {
    for (const auto& e : entries) {
      if (e.name == name || std::filesystem::path(e.name).stem().string() == name) return &e;
    }
    return nullptr;
  }
};

inline void to_json(json& j, const BlindBundle& b) {
  j = json::array();
  for (const auto& e : b.entries) j.push_back({{"name", e.name}, {"original", e.original_ref}, {"condition", e.condition}});
}

inline void from_json(const json& j, BlindBundle& b) {
  b.entries.clear();
  for (const auto& e : j) {
    b.entries.push_back({e.at("name").get<std::string>(), e.at("original").get<std::string>(),
                         e.at("condition").get<std::string>()});
  }
}

inline constexpr std::size_t kBlindNameLength = 12;

inline BlindBundle make_blind_bundle(std::span<const EvaluationRecord> records, std::uint64_t rng_seed) {
  static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::set<std::string> refs;
  for (const auto& r : records) {
    if (!refs.insert(r.image).second) throw EvaluationError("duplicate image ref " + r.image);
  }
  std::mt19937_64 rng(splitmix64(rng_seed));
  std::set<std::string> used;
  BlindBundle bundle;
  for (const auto& r : records) {
    std::string stem;
    do {
      stem.clear();
      for (std::size_t i = 0; i < kBlindNameLength; ++i) {
        stem.push_back(alphabet[static_cast<std::size_t>(unit_uniform(rng) * 36.0)]);
      }
    } while (!used.insert(stem).second);
    bundle.entries.push_back({stem + std::filesystem::path(r.image).extension().string(), r.image, r.condition});
  }
  std::sort(bundle.entries.begin(), bundle.entries.end(),
            [](const BlindEntry& a, const BlindEntry& b) { return a.name < b.name; });
  return bundle;
}

using ArtifactResolver = std::function<Bytes(const std::string& ref)>;

/// Writes <out>/images/<name> for every entry and <out>/manifest.json. The
/// images folder holds nothing but the renamed files.
inline void write_blind_bundle(const BlindBundle& bundle, const std::filesystem::path& out,
                               const ArtifactResolver& resolve) {
  const auto images = out / "images";
  std::filesystem::create_directories(images);
  for (const auto& e : bundle.entries) write_file_bytes(images / e.name, resolve(e.original_ref));
  write_file_text(out / "manifest.json", json(bundle).dump(1));
}

struct HumanScore {
  std::optional<int> assigned;
  std::optional<int> size;
  bool success = false;
};

/// CSV rows: name,assigned_score,size_score,success(0/1). Empty score cells
/// mean "not scored". A leading header row is skipped.
inline std::map<std::string, HumanScore> parse_scores_csv(const std::string& text) {
  std::map<std::string, HumanScore> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto parse_score = [&lineno](const std::string& cell) -> std::optional<int> {
    if (cell.empty()) return std::nullopt;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(cell, &pos);
    } catch (const std::exception&) {
      throw EvaluationError("line " + std::to_string(lineno) + ": bad score '" + cell + "'");
    }
    if (pos != cell.size()) throw EvaluationError("line " + std::to_string(lineno) + ": bad score '" + cell + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(detail::trim_copy(cell));
    if (line.back() == ',') cells.emplace_back();
    if (lineno == 1 && !cells.empty() && cells[0] == "name") continue;
    if (cells.size() != 4) throw EvaluationError("line " + std::to_string(lineno) + ": expected 4 columns");
    HumanScore s{parse_score(cells[1]), parse_score(cells[2]), false};
    if (cells[3] == "1" || cells[3] == "true") {
      s.success = true;
    } else if (cells[3] != "0" && cells[3] != "false") {
      throw EvaluationError("line " + std::to_string(lineno) + ": success must be 0 or 1");
    }
    out[cells[0]] = s;
  }
  return out;
}

/// Joins human scores back to original refs and conditions. Machine metrics
/// (CLIP, MQS) are copied from `originals` when a record with the same ref
/// is supplied.
inline std::vector<EvaluationRecord> ingest_scores(const BlindBundle& bundle,
                                                   const std::map<std::string, HumanScore>& scores,
                                                   std::span<const EvaluationRecord> originals = {}) {
  std::map<std::string, const EvaluationRecord*> by_ref;
  for (const auto& r : originals) by_ref[r.image] = &r;
  std::vector<EvaluationRecord> out;
  for (const auto& [name, score] : scores) {
    const BlindEntry* entry = bundle.find(name);
    if (!entry) throw EvaluationError("scored name '" + name + "' is not in the bundle manifest");
    EvaluationRecord r;
    r.image = entry->original_ref;
    r.condition = entry->condition;
    r.assigned_score = score.assigned;
    r.size_score = score.size;
    r.success = score.success;
    if (auto it = by_ref.find(r.image); it != by_ref.end()) {
      r.clip_score = it->second->clip_score;
      r.mqs = it->second->mqs;
    }
    check_record(r);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vpp
