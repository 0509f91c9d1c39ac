#pragma once

// On-disk bundle: a directory holding `manifest.json` (UTF-8) and `arrays.bin`
// (little-endian IEEE-754 float32, row-major). The manifest locates each array
// by byte offset and element count.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace nfsr {

inline constexpr int kBundleVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kArraysName = "arrays.bin";

struct ArrayRef {
  std::uint64_t offset = 0;  // bytes into arrays.bin
  std::vector<std::uint64_t> shape;

  std::uint64_t count() const;
  nlohmann::json to_json() const;
  static ArrayRef from_json(const nlohmann::json& j);
};

class BundleWriter {
 public:
  // Creates the directory if needed and truncates any previous bundle files.
  BundleWriter(const std::filesystem::path& dir, std::string kind);
  BundleWriter(const BundleWriter&) = delete;
  BundleWriter& operator=(const BundleWriter&) = delete;

  ArrayRef append(std::span<const float> values, std::vector<std::uint64_t> shape);
  nlohmann::json& manifest() { return manifest_; }
  // Flushes the blob and writes manifest.json.
  void finish();

 private:
  std::filesystem::path dir_;
  std::ofstream blob_;
  std::uint64_t written_ = 0;
  nlohmann::json manifest_;
  bool finished_ = false;
};

class BundleReader {
 public:
  // Throws IoError if files are missing, the manifest is malformed, the kind
  // differs from `expected_kind` (when non-empty) or the version is unsupported.
  explicit BundleReader(const std::filesystem::path& dir, const std::string& expected_kind = "");

  const nlohmann::json& manifest() const { return manifest_; }
  std::vector<float> read(const ArrayRef& ref) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
  std::vector<char> blob_;
};

}  // namespace nfsr
