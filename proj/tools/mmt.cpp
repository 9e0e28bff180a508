// mmt: multimodal sequence-to-sequence sentiment toolkit.
//
// Subcommands: generate (synthetic corpus), run (one pipeline spec), grid
// (the full 26-spec experiment grid), validate (dataset lint), report
// (re-render a machine-readable report as tables).
//
// Exit codes: 0 success, 1 validation failure, 2 training failure, 3 I/O
// failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmt/config.hpp"
#include "mmt/data.hpp"
#include "mmt/pipeline.hpp"
#include "mmt/report.hpp"
#include "mmt/runner.hpp"

namespace {

struct StageFlags {
  std::string cell;
  std::size_t layers = 0, hidden = 0, epochs = 0;
  double lr = -1.0, clip = -1.0;
  int attention = 0;  // 0 untouched, 1 on, -1 off

  void add(CLI::App* cmd, const std::string& prefix) {
    cmd->add_option("--" + prefix + "-cell", cell, "Cell kind (lstm|gru)");
    cmd->add_option("--" + prefix + "-layers", layers, "Stacked layer count");
    cmd->add_option("--" + prefix + "-hidden", hidden, "Hidden size");
    cmd->add_option("--" + prefix + "-epochs", epochs, "Epoch budget");
    cmd->add_option("--" + prefix + "-lr", lr, "Learning rate");
    cmd->add_option("--" + prefix + "-clip", clip, "Global gradient-norm clip");
    cmd->add_flag("--" + prefix + "-attention{1},--no-" + prefix + "-attention{-1}", attention,
                  "Toggle attention for this stage");
  }

  void apply(mmt::StageConfig& sc) const {
    if (!cell.empty()) sc.cell = mmt::cell_from_name(cell);
    if (layers) sc.layers = layers;
    if (hidden) sc.hidden = hidden;
    if (epochs) sc.epochs = epochs;
    if (lr >= 0.0) sc.learning_rate = lr;
    if (clip >= 0.0) sc.clip_norm = clip;
    if (attention == 1) sc.attention = true;
    if (attention == -1) sc.attention = false;
  }
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const mmt::IoError*>(&e)) return 3;
  if (dynamic_cast<const mmt::ValidationError*>(&e) || dynamic_cast<const mmt::ParseError*>(&e) ||
      dynamic_cast<const mmt::ShapeError*>(&e))
    return 1;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmt: multimodal seq2seq modality translation and sentiment regression"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Generate a synthetic word-aligned corpus");
  std::string gen_out;
  mmt::SyntheticSpec gen_spec;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Output dataset path (JSON lines)")->required();
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--segments", gen_spec.n_segments, "Segment count");
  gen->add_option("--t-min", gen_spec.t_min, "Minimum steps per segment");
  gen->add_option("--t-max", gen_spec.t_max, "Maximum steps per segment");
  gen->add_option("--d-text", gen_spec.d_text, "Text feature dim");
  gen->add_option("--d-audio", gen_spec.d_audio, "Audio feature dim");
  gen->add_option("--d-video", gen_spec.d_video, "Video feature dim");
  gen->add_option("--vocab", gen_spec.vocab, "Vocabulary size (ids 0/1 reserved)");
  gen->add_option("--coupling", gen_spec.coupling, "Cross-modal coupling in [0,1]");

  // ---- run / grid (shared flags) ----
  auto add_run_flags = [](CLI::App* cmd, std::string& dataset, std::string& config_file,
                          std::string& out, std::uint64_t& seed, StageFlags& tr, StageFlags& rg,
                          int& finetune, std::uint64_t& split_seed, std::size_t& beam,
                          std::size_t& embed_dim, std::size_t& accum) {
    cmd->add_option("--dataset", dataset, "Dataset path (JSON lines)");
    cmd->add_option("--config", config_file, "Base RunConfig JSON (flags override it)");
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--seed", seed, "Master seed")->required();
    cmd->add_option("--split-seed", split_seed, "Split seed (defaults to --seed)");
    cmd->add_option("--beam-width", beam, "Beam width recorded in the config");
    cmd->add_option("--embed-dim", embed_dim, "Discrete decoder embedding width (0: hidden)");
    cmd->add_option("--accum-steps", accum, "Examples per parameter update");
    tr.add(cmd, "translation");
    rg.add(cmd, "regression");
    cmd->add_flag("--finetune-encoder{1},--freeze-encoder{-1}", finetune,
                  "Unfreeze the upstream encoder during sentiment regression");
  };

  auto* run = app.add_subcommand("run", "Run one pipeline spec end to end");
  std::string run_spec, run_dataset, run_config_file, run_out;
  std::uint64_t run_seed = 0, run_split_seed = 0;
  std::size_t run_beam = 0;
  StageFlags run_tr, run_rg;
  int run_finetune = 0;
  std::size_t halt_after = 0, run_embed = 0, run_accum = 0;
  run->add_option("--spec", run_spec, "Pipeline spec id (see `mmt list`)");
  add_run_flags(run, run_dataset, run_config_file, run_out, run_seed, run_tr, run_rg,
                run_finetune, run_split_seed, run_beam, run_embed, run_accum);
  run->add_option("--halt-after-epochs", halt_after,
                  "Stop cleanly after N epochs (resume by re-running with the same flags)");

  auto* grid = app.add_subcommand("grid", "Run the full 26-spec experiment grid");
  std::string grid_dataset, grid_config_file, grid_out;
  std::uint64_t grid_seed = 0, grid_split_seed = 0;
  std::size_t grid_beam = 0;
  StageFlags grid_tr, grid_rg;
  int grid_finetune = 0;
  std::size_t grid_jobs = 1, grid_embed = 0, grid_accum = 0;
  add_run_flags(grid, grid_dataset, grid_config_file, grid_out, grid_seed, grid_tr, grid_rg,
                grid_finetune, grid_split_seed, grid_beam, grid_embed, grid_accum);
  grid->add_option("--jobs", grid_jobs, "Concurrent spec runs");

  auto* list = app.add_subcommand("list", "Print the 26-spec manifest");

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "Check a dataset file");
  std::string val_path;
  validate->add_option("path", val_path, "Dataset path")->required();

  // ---- report ----
  auto* report = app.add_subcommand("report", "Re-render a report.json as tables");
  std::string report_path;
  report->add_option("path", report_path, "report.json path")->required();

  CLI11_PARSE(app, argc, argv);

  auto assemble_config = [&](const std::string& config_file, const std::string& dataset,
                             std::uint64_t seed, std::uint64_t split_seed, const StageFlags& tr,
                             const StageFlags& rg, int finetune, std::size_t beam,
                             std::size_t embed_dim, std::size_t accum,
                             const std::string& spec_id) {
    mmt::RunConfig cfg;
    if (!config_file.empty()) {
      std::ifstream f(config_file);
      if (!f) throw mmt::IoError("cannot open config: " + config_file);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const nlohmann::json::parse_error& e) {
        throw mmt::ParseError(config_file + ": " + e.what());
      }
      cfg = mmt::run_config_from_json(j);
    }
    if (!spec_id.empty()) cfg.spec_id = spec_id;
    if (!dataset.empty()) {
      cfg.dataset_path = dataset;
      cfg.synthetic.reset();
    }
    cfg.seed = seed;
    if (split_seed) cfg.split_seed = split_seed;
    if (beam) cfg.beam_width = beam;
    tr.apply(cfg.pipeline.translation);
    rg.apply(cfg.pipeline.regression);
    if (finetune == 1) cfg.pipeline.finetune_encoder = true;
    if (finetune == -1) cfg.pipeline.finetune_encoder = false;
    if (embed_dim) cfg.pipeline.embed_dim = embed_dim;
    if (accum) cfg.pipeline.accum_steps = accum;
    cfg.pipeline.seed = cfg.seed;
    return cfg;
  };

  try {
    if (*gen) {
      gen_spec.seed = gen_seed;
      mmt::Dataset ds = mmt::generate_synthetic(gen_spec);
      mmt::save_dataset(ds, gen_out);
      std::printf("wrote %zu segments to %s\n", ds.segments.size(), gen_out.c_str());
      return 0;
    }
    if (*run) {
      if (run_spec.empty() && run_config_file.empty())
        throw mmt::ValidationError("run: --spec or --config required");
      mmt::RunConfig cfg = assemble_config(run_config_file, run_dataset, run_seed,
                                           run_split_seed, run_tr, run_rg, run_finetune,
                                           run_beam, run_embed, run_accum, run_spec);
      mmt::Runner runner(cfg, run_out);
      const bool done = runner.execute(halt_after ? halt_after : static_cast<std::size_t>(-1));
      if (!done) {
        std::printf("halted after %zu epochs; re-run to resume\n", halt_after);
        return 0;
      }
      std::printf("%s", mmt::detail::read_file(runner.path("report.txt")).c_str());
      return 0;
    }
    if (*list) {
      for (const mmt::PipelineSpec& s : mmt::enumerate_variations())
        std::printf("%-30s %s\n", s.id.c_str(), mmt::pipeline_kind_name(s.kind));
      return 0;
    }
    if (*grid) {
      mmt::RunConfig base = assemble_config(grid_config_file, grid_dataset, grid_seed,
                                            grid_split_seed, grid_tr, grid_rg, grid_finetune,
                                            grid_beam, grid_embed, grid_accum, "");
      auto rows = mmt::run_grid(base, grid_out, grid_jobs);
      std::printf("%s", mmt::detail::read_file(
                            (std::filesystem::path(grid_out) / "grid-summary.txt").string())
                            .c_str());
      std::size_t failed = 0;
      for (const auto& r : rows)
        if (!r.ok) ++failed;
      if (failed) {
        std::fprintf(stderr, "%zu of %zu specs failed\n", failed, rows.size());
        return 2;
      }
      return 0;
    }
    if (*validate) {
      mmt::Dataset ds;
      try {
        ds = mmt::parse_dataset(val_path);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
      }
      auto problems = mmt::validate_dataset(ds);
      for (const std::string& p : problems) std::fprintf(stderr, "%s\n", p.c_str());
      if (!problems.empty()) return 1;
      std::printf("%s: %zu segments, ok\n", val_path.c_str(), ds.segments.size());
      return 0;
    }
    if (*report) {
      nlohmann::json j = nlohmann::json::parse(mmt::detail::read_file(report_path));
      std::printf("%s", mmt::render_report_text(j).c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return 0;
}
