#pragma once

#include <string>
#include <vector>

#include "dlalign/config.hpp"
#include "dlalign/manifest.hpp"

namespace dlalign {

extern const char* kToolVersion;

// One pipeline owns its output directory exclusively (lockfile); every stage
// appends to the run manifest and is skipped on rerun when its outputs still
// digest-match.
struct PipelineContext {
  RunConfig config;
  std::string out;  // output directory root
  RunManifest manifest;
  bool quiet = false;

  std::string path(const std::string& rel) const { return out + "/" + rel; }
};

// Creates/locks the output directory, loads or creates the manifest, writes
// the echoed config. Throws std::invalid_argument when an existing manifest
// was produced by a different config.
PipelineContext open_pipeline(const RunConfig& config, bool resume = false);
void close_pipeline(const PipelineContext& ctx);  // releases the lock

// Individual stages. Each verifies upstream digests, skips itself when
// already satisfied, and records its inputs/outputs in the manifest.
void run_gen_motions(PipelineContext& ctx);
void run_pretrain(PipelineContext& ctx);
void run_collect(PipelineContext& ctx);
void run_train_delta(PipelineContext& ctx);
void run_train_delta_dyn(PipelineContext& ctx);
void run_sysid(PipelineContext& ctx);
// method: asap | plain | sysid | delta_dynamics
void run_finetune(PipelineContext& ctx, const std::string& method);
void run_noise_finetune(PipelineContext& ctx);
void run_eval_open(PipelineContext& ctx);
void run_eval_closed(PipelineContext& ctx);
void run_ablate(PipelineContext& ctx);

// gen -> pretrain -> collect -> align(config.align.method) -> finetune ->
// eval; "all" additionally trains every baseline and emits the comparison
// table.
void run_full_pipeline(PipelineContext& ctx);

}  // namespace dlalign
