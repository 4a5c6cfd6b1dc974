#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlalign {

// Upstream artifact whose content no longer matches its recorded digest.
// Maps to exit code 3 at the CLI boundary.
struct DigestError : std::runtime_error {
  explicit DigestError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or diverged training. Exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct FileDigest {
  std::string path;  // relative to the output dir
  std::uint64_t digest = 0;
};

struct StageRecord {
  std::string stage;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::string completed_at;  // wall-clock; lives only in the manifest
};

// Machine-readable record of a run: the config snapshot and a digest of
// every file each stage read or wrote. Records are append-only.
struct RunManifest {
  std::string tool_version;
  std::uint64_t config_hash = 0;
  std::string config_json;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;

  const StageRecord* find(const std::string& stage) const;
};

std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 14695981039346656037ULL);
// Digest of a file's bytes; throws DigestError if it cannot be read.
std::uint64_t file_digest(const std::string& path);

void save_manifest(const RunManifest& m, const std::string& path);
RunManifest load_manifest(const std::string& path);

// True when the stage completed and every recorded output still matches its
// digest on disk (paths resolved relative to root_dir). Missing record or
// missing file -> false; existing file with a different digest -> DigestError.
bool stage_satisfied(const RunManifest& m, const std::string& stage,
                     const std::string& root_dir);

// Checks that each path was recorded as an output of `producer_stage` and
// still matches; throws DigestError naming the first offender.
void verify_inputs(const RunManifest& m, const std::string& producer_stage,
                   const std::vector<std::string>& rel_paths,
                   const std::string& root_dir);

std::string current_timestamp();

}  // namespace dlalign
