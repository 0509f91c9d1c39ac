#include "nfsr/bundle.hpp"

#include <bit>
#include <cstring>

#include "nfsr/error.hpp"

namespace nfsr {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

}  // namespace

std::uint64_t ArrayRef::count() const {
  std::uint64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

nlohmann::json ArrayRef::to_json() const { return {{"offset", offset}, {"shape", shape}}; }

ArrayRef ArrayRef::from_json(const nlohmann::json& j) {
  ArrayRef r;
  r.offset = j.at("offset").get<std::uint64_t>();
  r.shape = j.at("shape").get<std::vector<std::uint64_t>>();
  return r;
}

BundleWriter::BundleWriter(const fs::path& dir, std::string kind) : dir_(dir) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create bundle directory " + dir_.string() + ": " + ec.message());
  blob_.open(dir_ / kArraysName, std::ios::binary | std::ios::trunc);
  if (!blob_) throw IoError("cannot open " + (dir_ / kArraysName).string() + " for writing");
  manifest_ = {{"format", "nfsr-bundle"}, {"version", kBundleVersion}, {"kind", std::move(kind)}};
}

ArrayRef BundleWriter::append(std::span<const float> values, std::vector<std::uint64_t> shape) {
  ArrayRef ref;
  ref.offset = written_;
  ref.shape = std::move(shape);
  if (ref.count() != values.size())
    throw ConfigError("bundle array shape does not match element count");
  std::vector<std::uint32_t> le(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    le[i] = to_little_endian(std::bit_cast<std::uint32_t>(values[i]));
  blob_.write(reinterpret_cast<const char*>(le.data()),
              static_cast<std::streamsize>(le.size() * sizeof(std::uint32_t)));
  if (!blob_) throw IoError("failed writing " + (dir_ / kArraysName).string());
  written_ += le.size() * sizeof(std::uint32_t);
  return ref;
}

void BundleWriter::finish() {
  if (finished_) return;
  blob_.close();
  if (!blob_) throw IoError("failed closing " + (dir_ / kArraysName).string());
  manifest_["blob_bytes"] = written_;
  std::ofstream out(dir_ / kManifestName, std::ios::trunc);
  if (!out) throw IoError("cannot open " + (dir_ / kManifestName).string() + " for writing");
  out << manifest_.dump(1) << '\n';
  if (!out) throw IoError("failed writing " + (dir_ / kManifestName).string());
  finished_ = true;
}

BundleReader::BundleReader(const fs::path& dir, const std::string& expected_kind) : dir_(dir) {
  const fs::path mpath = dir_ / kManifestName;
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open " + mpath.string());
  try {
    manifest_ = nlohmann::json::parse(in);
    if (manifest_.at("format").get<std::string>() != "nfsr-bundle")
      throw IoError(mpath.string() + ": not an nfsr bundle");
    if (manifest_.at("version").get<int>() != kBundleVersion)
      throw IoError(mpath.string() + ": unsupported bundle version " +
                    manifest_.at("version").dump());
    if (!expected_kind.empty() && manifest_.at("kind").get<std::string>() != expected_kind)
      throw IoError(mpath.string() + ": expected bundle kind '" + expected_kind + "', found '" +
                    manifest_.at("kind").get<std::string>() + "'");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(mpath.string() + ": malformed manifest (" + e.what() + ")");
  }

  const fs::path bpath = dir_ / kArraysName;
  std::ifstream blob(bpath, std::ios::binary | std::ios::ate);
  if (!blob) throw IoError("cannot open " + bpath.string());
  const auto size = static_cast<std::size_t>(blob.tellg());
  blob.seekg(0);
  blob_.resize(size);
  blob.read(blob_.data(), static_cast<std::streamsize>(size));
  if (!blob) throw IoError("failed reading " + bpath.string());
  if (manifest_.contains("blob_bytes") && manifest_["blob_bytes"].get<std::uint64_t>() != size)
    throw IoError(bpath.string() + ": size does not match manifest");
}

std::vector<float> BundleReader::read(const ArrayRef& ref) const {
  const std::uint64_t n = ref.count();
  if (ref.offset % 4 != 0 || ref.offset + n * 4 > blob_.size())
    throw IoError((dir_ / kArraysName).string() + ": array reference out of range");
  std::vector<float> out(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, blob_.data() + ref.offset + i * 4, 4);
    out[i] = std::bit_cast<float>(to_little_endian(raw));
  }
  return out;
}

}  // namespace nfsr
