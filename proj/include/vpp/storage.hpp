// Copyright (C) 2026 The vpp Authors
// SPDX-License-Identifier: Apache-2.0

// Persistence: a content-addressed artifact store for image bytes and a
// document store for JSON records (runs, jobs, reports, registry entries).

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vpp/domain.hpp"
#include "vpp/image.hpp"

namespace vpp {

class StorageError : public Error {
 public:
  using Error::Error;
};

/// Refs have the form "sha256:<hex>". put() is idempotent.
class ArtifactStore {
 public:
  virtual ~ArtifactStore() = default;
  virtual std::string put(std::span<const std::uint8_t> bytes) = 0;
  virtual std::optional<Bytes> get(const std::string& ref) const = 0;
  virtual bool contains(const std::string& ref) const = 0;

  static std::string ref_for(std::span<const std::uint8_t> bytes) { return "sha256:" + sha256_hex(bytes); }

  Bytes require(const std::string& ref) const {
    auto bytes = get(ref);
    if (!bytes) throw StorageError("unknown artifact " + ref);
    return std::move(*bytes);
  }

  std::string put_png(const Image& image) { return put(encode_png(image)); }
  std::string put_mask(const BinaryMask& mask) { return put(encode_mask_png(mask)); }
  Image get_png(const std::string& ref) const { return decode_png(require(ref)); }
  BinaryMask get_mask(const std::string& ref) const { return decode_mask_png(require(ref)); }

 protected:
  static bool well_formed(const std::string& ref) {
    if (ref.size() != 7 + 64 || ref.compare(0, 7, "sha256:") != 0) return false;
    for (std::size_t i = 7; i < ref.size(); ++i) {
      const char c = ref[i];
      if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
  }
};

class MemoryArtifactStore : public ArtifactStore {
 public:
  std::string put(std::span<const std::uint8_t> bytes) override {
    auto ref = ref_for(bytes);
    std::lock_guard lock(mu_);
    blobs_.try_emplace(ref, bytes.begin(), bytes.end());
    return ref;
  }

  std::optional<Bytes> get(const std::string& ref) const override {
    std::lock_guard lock(mu_);
    if (auto it = blobs_.find(ref); it != blobs_.end()) return it->second;
    return std::nullopt;
  }

  bool contains(const std::string& ref) const override {
    std::lock_guard lock(mu_);
    return blobs_.count(ref) != 0;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Bytes> blobs_;
};

/// Blobs live at <root>/<first two hex chars>/<hex>.
class FilesystemArtifactStore : public ArtifactStore {
 public:
  explicit FilesystemArtifactStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  std::string put(std::span<const std::uint8_t> bytes) override {
    auto ref = ref_for(bytes);
    const auto path = path_for(ref);
    if (std::filesystem::exists(path)) return ref;
    std::filesystem::create_directories(path.parent_path());
    // Write under a unique temp name, then rename: concurrent writers of the
    // same content race harmlessly.
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp" + std::to_string(next_tmp()));
    write_file_bytes(tmp, bytes);
    std::filesystem::rename(tmp, path);
    return ref;
  }

  std::optional<Bytes> get(const std::string& ref) const override {
    if (!well_formed(ref)) return std::nullopt;
    const auto path = path_for(ref);
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file_bytes(path);
  }

  bool contains(const std::string& ref) const override {
    return well_formed(ref) && std::filesystem::exists(path_for(ref));
  }

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path path_for(const std::string& ref) const {
    const std::string hex = ref.substr(7);
    return root_ / hex.substr(0, 2) / hex;
  }

  static std::uint64_t next_tmp() {
    static std::atomic<std::uint64_t> counter{0};
    return counter.fetch_add(1) ^ (static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(&counter)) << 16);
  }

  std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Documents
// ---------------------------------------------------------------------------

/// JSON documents grouped in collections and keyed by id. Serialized text is
/// stored verbatim so a re-read returns byte-identical output.
class DocumentStore {
 public:
  virtual ~DocumentStore() = default;

  /// Append-only insert. Re-inserting identical text is a no-op; different
  /// text under an existing id throws.
  virtual void insert(const std::string& collection, const std::string& id, const std::string& text) = 0;
  /// Insert or overwrite (mutable records such as job status).
  virtual void upsert(const std::string& collection, const std::string& id, const std::string& text) = 0;
  virtual std::optional<std::string> get(const std::string& collection, const std::string& id) const = 0;
  virtual std::vector<std::string> ids(const std::string& collection) const = 0;

  std::optional<json> get_json(const std::string& collection, const std::string& id) const {
    auto text = get(collection, id);
    if (!text) return std::nullopt;
    return json::parse(*text);
  }
};

class MemoryDocumentStore : public DocumentStore {
 public:
  void insert(const std::string& collection, const std::string& id, const std::string& text) override {
    std::lock_guard lock(mu_);
    auto& docs = data_[collection];
    auto [it, inserted] = docs.try_emplace(id, text);
    if (!inserted && it->second != text) throw StorageError(collection + "/" + id + " already exists");
  }

  void upsert(const std::string& collection, const std::string& id, const std::string& text) override {
    std::lock_guard lock(mu_);
    data_[collection][id] = text;
  }

  std::optional<std::string> get(const std::string& collection, const std::string& id) const override {
    std::lock_guard lock(mu_);
    auto c = data_.find(collection);
    if (c == data_.end()) return std::nullopt;
    auto it = c->second.find(id);
    if (it == c->second.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> ids(const std::string& collection) const override {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    if (auto c = data_.find(collection); c != data_.end()) {
      for (const auto& [id, text] : c->second) out.push_back(id);
    }
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::map<std::string, std::string>> data_;
};

/// Documents at <root>/<collection>/<id>.json. Ids are restricted to
/// [A-Za-z0-9._-] so they map to plain file names.
class FilesystemDocumentStore : public DocumentStore {
 public:
  explicit FilesystemDocumentStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  void insert(const std::string& collection, const std::string& id, const std::string& text) override {
    std::lock_guard lock(mu_);
    const auto path = path_for(collection, id);
    if (std::filesystem::exists(path)) {
      if (read_file_text(path) != text) throw StorageError(collection + "/" + id + " already exists");
      return;
    }
    write_atomic(path, text);
  }

  void upsert(const std::string& collection, const std::string& id, const std::string& text) override {
    std::lock_guard lock(mu_);
    write_atomic(path_for(collection, id), text);
  }

  std::optional<std::string> get(const std::string& collection, const std::string& id) const override {
    std::lock_guard lock(mu_);
    if (!valid_id(id) || !valid_id(collection)) return std::nullopt;
    const auto path = root_ / collection / (id + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_file_text(path);
  }

  std::vector<std::string> ids(const std::string& collection) const override {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    const auto dir = root_ / collection;
    if (!valid_id(collection) || !std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") out.push_back(entry.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static bool valid_id(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    for (char c : id) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
    }
    return true;
  }

  std::filesystem::path path_for(const std::string& collection, const std::string& id) const {
    if (!valid_id(collection) || !valid_id(id)) throw StorageError("invalid document id '" + id + "'");
    return root_ / collection / (id + ".json");
  }

  static void write_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    write_file_text(tmp, text);
    std::filesystem::rename(tmp, path);
  }

  std::filesystem::path root_;
  mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Model registry
// ---------------------------------------------------------------------------

struct ModelRegistryEntry {
  std::string product_id;
  std::string model_ref;
  std::uint64_t size_bytes = 0;
  std::string created_at;
  std::string training_job_ref;
};

inline void to_json(json& j, const ModelRegistryEntry& e) {
  j = json{{"product_id", e.product_id},
           {"model_ref", e.model_ref},
           {"size_bytes", e.size_bytes},
           {"created_at", e.created_at},
           {"training_job_ref", e.training_job_ref}};
}

inline void from_json(const json& j, ModelRegistryEntry& e) {
  j.at("product_id").get_to(e.product_id);
  j.at("model_ref").get_to(e.model_ref);
  j.at("size_bytes").get_to(e.size_bytes);
  detail::get_to_if(j, "created_at", e.created_at);
  detail::get_to_if(j, "training_job_ref", e.training_job_ref);
}

/// One entry per completed fine-tune; the newest entry for a product is its
/// active model.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::shared_ptr<DocumentStore> docs) : docs_(std::move(docs)) {}

  void record(const ModelRegistryEntry& entry) {
    if (entry.size_bytes == 0) throw ContractError("registry entry size_bytes must be > 0");
    if (entry.product_id.empty() || entry.model_ref.empty()) throw ContractError("registry entry is incomplete");
    std::lock_guard lock(mu_);
    const auto existing = docs_->ids(kEntries);
    char id[32];
    std::snprintf(id, sizeof id, "%08zu", existing.size());
    docs_->insert(kEntries, id, json(entry).dump());
    docs_->upsert(kActive, entry.product_id, json{{"entry_id", id}}.dump());
  }

  std::optional<ModelRegistryEntry> active(const std::string& product_id) const {
    auto pointer = docs_->get_json(kActive, product_id);
    if (!pointer) return std::nullopt;
    auto entry = docs_->get_json(kEntries, pointer->at("entry_id").get<std::string>());
    if (!entry) return std::nullopt;
    return entry->get<ModelRegistryEntry>();
  }

  std::vector<ModelRegistryEntry> entries() const {
    std::vector<ModelRegistryEntry> out;
    for (const auto& id : docs_->ids(kEntries)) out.push_back(docs_->get_json(kEntries, id)->get<ModelRegistryEntry>());
    return out;
  }

  std::uint64_t total_bytes() const {
    std::uint64_t sum = 0;
    for (const auto& e : entries()) sum += e.size_bytes;
    return sum;
  }

 private:
  static constexpr const char* kEntries = "models";
  static constexpr const char* kActive = "active_models";

  std::shared_ptr<DocumentStore> docs_;
  std::mutex mu_;
};

}  // namespace vpp
