// dlalign: sim-to-sim dynamics alignment pipeline for a planar N-link chain.
//
// Exit codes: 0 success, 2 config error, 3 digest mismatch, 4 numeric fault.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dlalign/config.hpp"
#include "dlalign/manifest.hpp"
#include "dlalign/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_override;
  std::string method_override;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "run configuration (JSON)")
      ->required();
  cmd->add_option("--seed", opt.seed, "override config seed")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  cmd->add_option("--out", opt.out_override, "override output directory");
  cmd->add_flag("--resume", opt.resume, "continue in an existing output dir");
}

int run_stage(const CliOptions& opt, const std::string& stage,
              const std::string& eval_which) {
  dlalign::RunConfig config = dlalign::load_config(opt.config_path);
  if (opt.seed_set) config.seed = opt.seed;
  if (!opt.out_override.empty()) config.io.output_dir = opt.out_override;
  if (!opt.method_override.empty()) config.align.method = opt.method_override;

  dlalign::PipelineContext ctx = dlalign::open_pipeline(config, opt.resume);
  try {
    if (stage == "gen-motions") {
      dlalign::run_gen_motions(ctx);
    } else if (stage == "pretrain") {
      dlalign::run_pretrain(ctx);
    } else if (stage == "collect") {
      dlalign::run_collect(ctx);
    } else if (stage == "train-delta") {
      dlalign::run_train_delta(ctx);
    } else if (stage == "train-delta-dyn") {
      dlalign::run_train_delta_dyn(ctx);
    } else if (stage == "sysid") {
      dlalign::run_sysid(ctx);
    } else if (stage == "finetune") {
      dlalign::run_finetune(ctx, ctx.config.align.method);
    } else if (stage == "noise-finetune") {
      dlalign::run_noise_finetune(ctx);
    } else if (stage == "eval") {
      if (eval_which == "open" || eval_which == "both")
        dlalign::run_eval_open(ctx);
      if (eval_which == "closed" || eval_which == "both")
        dlalign::run_eval_closed(ctx);
    } else if (stage == "ablate") {
      dlalign::run_ablate(ctx);
    } else if (stage == "full-pipeline") {
      dlalign::run_full_pipeline(ctx);
    }
  } catch (...) {
    dlalign::close_pipeline(ctx);
    throw;
  }
  dlalign::close_pipeline(ctx);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dlalign: delta-action dynamics alignment on a planar chain"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string eval_which = "both";
  const char* stages[] = {"gen-motions",     "pretrain", "collect",
                          "train-delta",     "train-delta-dyn",
                          "sysid",           "finetune", "noise-finetune",
                          "eval",            "ablate",   "full-pipeline"};
  for (const char* name : stages) {
    CLI::App* cmd = app.add_subcommand(name);
    add_common(cmd, opt);
    if (std::string(name) == "finetune" || std::string(name) == "full-pipeline")
      cmd->add_option("--method", opt.method_override,
                      "asap | sysid | delta_dynamics | noise | plain | all");
    if (std::string(name) == "eval")
      cmd->add_option("--which", eval_which, "open | closed | both");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  // worker count comes from the environment only; stages run single-threaded
  // today, so the value is validated and reserved
  if (const char* w = std::getenv("DLALIGN_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(w, &end, 10);
    if (end == w || *end != '\0' || v < 1) {
      std::cerr << "config error: DLALIGN_WORKERS must be a positive integer"
                << std::endl;
      return 2;
    }
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    return run_stage(opt, stage, eval_which);
  } catch (const dlalign::DigestError& e) {
    std::cerr << "digest error: " << e.what() << std::endl;
    return 3;
  } catch (const dlalign::NumericError& e) {
    std::cerr << "numeric fault: " << e.what() << std::endl;
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
