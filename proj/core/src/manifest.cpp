#include "dlalign/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dlalign {

using nlohmann::json;

const StageRecord* RunManifest::find(const std::string& stage) const {
  for (const auto& s : stages)
    if (s.stage == stage) return &s;
  return nullptr;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DigestError("cannot read file for digest: " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

namespace {

json digests_to_json(const std::vector<FileDigest>& ds) {
  json arr = json::array();
  for (const auto& d : ds) {
    std::ostringstream hex;
    hex << std::hex << d.digest;
    arr.push_back({{"path", d.path}, {"digest", hex.str()}});
  }
  return arr;
}

std::vector<FileDigest> digests_from_json(const json& arr) {
  std::vector<FileDigest> out;
  for (const auto& e : arr) {
    FileDigest d;
    d.path = e.at("path").get<std::string>();
    d.digest = std::stoull(e.at("digest").get<std::string>(), nullptr, 16);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

void save_manifest(const RunManifest& m, const std::string& path) {
  json j;
  j["tool_version"] = m.tool_version;
  std::ostringstream hex;
  hex << std::hex << m.config_hash;
  j["config_hash"] = hex.str();
  j["config"] = json::parse(m.config_json);
  j["seed"] = m.seed;
  json stages = json::array();
  for (const auto& s : m.stages)
    stages.push_back({{"stage", s.stage},
                      {"inputs", digests_to_json(s.inputs)},
                      {"outputs", digests_to_json(s.outputs)},
                      {"completed_at", s.completed_at}});
  j["stages"] = stages;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j = json::parse(in);
  RunManifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  m.config_json = j.at("config").dump(2);
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("stages")) {
    StageRecord r;
    r.stage = s.at("stage").get<std::string>();
    r.inputs = digests_from_json(s.at("inputs"));
    r.outputs = digests_from_json(s.at("outputs"));
    r.completed_at = s.at("completed_at").get<std::string>();
    m.stages.push_back(std::move(r));
  }
  return m;
}

bool stage_satisfied(const RunManifest& m, const std::string& stage,
                     const std::string& root_dir) {
  const StageRecord* rec = m.find(stage);
  if (!rec) return false;
  for (const auto& d : rec->outputs) {
    const std::string full = root_dir + "/" + d.path;
    std::ifstream probe(full, std::ios::binary);
    if (!probe) return false;  // output gone: redo the stage
    probe.close();
    if (file_digest(full) != d.digest)
      throw DigestError("digest mismatch for " + d.path + " (stage " + stage +
                        ")");
  }
  return true;
}

void verify_inputs(const RunManifest& m, const std::string& producer_stage,
                   const std::vector<std::string>& rel_paths,
                   const std::string& root_dir) {
  const StageRecord* rec = m.find(producer_stage);
  if (!rec)
    throw DigestError("missing upstream stage '" + producer_stage + "'");
  for (const auto& path : rel_paths) {
    const FileDigest* found = nullptr;
    for (const auto& d : rec->outputs)
      if (d.path == path) found = &d;
    if (!found)
      throw DigestError("file " + path + " not recorded by stage '" +
                        producer_stage + "'");
    if (file_digest(root_dir + "/" + path) != found->digest)
      throw DigestError("digest mismatch for " + path + " (produced by " +
                        producer_stage + ")");
  }
}

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace dlalign
