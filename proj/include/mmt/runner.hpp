#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "mmt/checkpoint.hpp"
#include "mmt/config.hpp"
#include "mmt/pipeline.hpp"
#include "mmt/report.hpp"

namespace mmt {

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline DenseArray curve_array(const std::vector<double>& v) {
  return DenseArray({v.size()}, std::vector<double>(v));
}

inline std::string curve_csv(const LossCurve& c) {
  std::string out = "epoch,train,val\n";
  for (std::size_t i = 0; i < c.train.size(); ++i) {
    char buf[96];
    if (i < c.val.size())
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, c.train[i], c.val[i]);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.17g,\n", i, c.train[i]);
    out += buf;
  }
  return out;
}

}  // namespace detail

// Executes one RunConfig inside an output directory it owns: per-epoch
// checkpoints, resumable at epoch boundaries, loss-curve CSVs, and the final
// report pair (report.json / report.txt). A directory is resumed only when
// it holds the identical config.
class Runner {
 public:
  Runner(RunConfig cfg, std::string out_dir)
      : cfg_(std::move(cfg)), out_(std::move(out_dir)), hash_(config_hash(cfg_)) {}

  // Runs to completion unless halt_after_epochs epochs complete first (the
  // counter spans phases within this call). Returns true when the report was
  // written.
  bool execute(std::size_t halt_after_epochs = static_cast<std::size_t>(-1)) {
    namespace fs = std::filesystem;
    fs::create_directories(out_);
    claim_directory();
    try {
      return run_phases(halt_after_epochs);
    } catch (const std::exception& e) {
      detail::write_file(path("FAILED"), std::string(e.what()) + "\n");
      throw;
    }
  }

  const RunConfig& config() const { return cfg_; }
  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_) / name).string();
  }

 private:
  void claim_directory() {
    const std::string cfg_path = path("config.json");
    const std::string serialized = to_json(cfg_).dump(2) + "\n";
    if (std::filesystem::exists(cfg_path)) {
      if (detail::read_file(cfg_path) != serialized)
        throw ValidationError(out_ + " belongs to a different config; refusing to resume");
      std::error_code ec;
      std::filesystem::remove(path("FAILED"), ec);
      return;
    }
    detail::write_file(cfg_path, serialized);
  }

  Dataset load_data() const {
    if (cfg_.synthetic) return generate_synthetic(*cfg_.synthetic);
    if (cfg_.dataset_path.empty())
      throw ValidationError("config: either a dataset path or synthetic parameters required");
    return load_dataset(cfg_.dataset_path);
  }

  struct HaltBudget {
    std::size_t remaining;
    bool spend() {
      if (remaining == 0) return false;
      --remaining;
      return remaining > 0;
    }
  };

  bool run_phases(std::size_t halt_after) {
    const PipelineSpec spec = spec_by_id(cfg_.spec_id);
    Dataset ds = load_data();
    DatasetSplit split = split_dataset(ds.segments.size(), cfg_.train_frac,
                                       cfg_.val_frac_of_train, cfg_.effective_split_seed());
    PipelineConfig pcfg = cfg_.pipeline;
    pcfg.seed = cfg_.seed;
    detail::SplitView view = detail::split_view(ds, split);
    HaltBudget budget{halt_after};

    PipelineResult result;
    result.spec = spec;

    // translation stages
    const std::size_t stages = spec.translation_stage_count();
    for (std::size_t stage = 0; stage < stages; ++stage) {
      TranslationModel model = make_stage_model(spec, stage, ds.info, pcfg);
      const std::string name = "translation" + std::to_string(stage + 1);
      const std::string ckpt_path = path("phase-" + name + ".ckpt");
      LossCurve curve;
      std::size_t start = 0;
      if (std::filesystem::exists(ckpt_path)) {
        Checkpoint ck = load_checkpoint(ckpt_path);
        check_hash(ck, ckpt_path);
        restore_params(ck, "model/", model.named_params());
        curve = curve_from(ck);
        start = ck.training.at("epochs_done").get<std::size_t>();
      }
      if (start < pcfg.translation.epochs) {
        std::vector<TranslationExample> train, val;
        auto example = [&](const AlignedSegment& s) {
          if (stage == 0) return make_stage1_example(spec, s);
          TranslationExample ex;
          ex.source = encode(concat_modalities(s, spec.source).features, *result.stage1).states;
          ex.target = make_target(s, spec.target);
          return ex;
        };
        for (const AlignedSegment* s : view.train) train.push_back(example(*s));
        for (const AlignedSegment* s : view.val) val.push_back(example(*s));
        TrainOptions opt = detail::stage_options(pcfg.translation, phase_seed(pcfg.seed, stage),
                                                 pcfg.accum_steps);
        opt.start_epoch = start;
        bool halted = false;
        opt.on_epoch = [&](std::size_t epoch, const LossCurve& c) {
          save_translation_ckpt(ckpt_path, model, c, epoch + 1);
          if (!budget.spend()) {
            halted = true;
            return false;
          }
          return true;
        };
        curve = train_translation(model, train, val, opt, curve);
        if (halted) return false;
      }
      detail::write_file(path("curves-" + name + ".csv"), detail::curve_csv(curve));
      result.translation_curves.push_back(StageRecord{name, curve});
      if (stage == 0)
        result.stage1 = std::move(model);
      else
        result.stage2 = std::move(model);
    }

    // regression phase
    result.head = make_regression_head(spec, ds.info, pcfg);
    const std::string reg_ckpt = path("phase-regression.ckpt");
    RegressionTrainState state;
    TranslationModel* upstream = stages == 0 ? nullptr
                                 : (spec.kind == PipelineKind::hierarchical ? &*result.stage2
                                                                            : &*result.stage1);
    const bool finetune = pcfg.finetune_encoder && stages > 0;
    auto reg_named = [&]() {
      auto named = result.head.named_params();
      if (finetune)
        for (auto& np : upstream->encoder.named_params("upstream-encoder")) named.push_back(np);
      return named;
    };
    if (std::filesystem::exists(reg_ckpt)) {
      Checkpoint ck = load_checkpoint(reg_ckpt);
      check_hash(ck, reg_ckpt);
      restore_params(ck, "model/", reg_named());
      state.curve = curve_from(ck);
      if (!ck.training.at("best_val").is_null()) {
        state.best_val = ck.training.at("best_val").get<double>();
        state.best_epoch = ck.training.at("best_epoch").get<std::size_t>();
        for (const auto& [name, a] : ck.arrays)
          if (name.rfind("best/", 0) == 0) state.best_params.push_back(a);
      }
    }
    bool reg_halted = false;
    const std::size_t done_epochs = state.curve.train.size();
    if (done_epochs < pcfg.regression.epochs) {
      auto on_epoch = [&](std::size_t epoch, const LossCurve&) {
        save_regression_ckpt(reg_ckpt, reg_named(), state, epoch + 1);
        if (!budget.spend()) {
          reg_halted = true;
          return false;
        }
        return true;
      };
      run_regression_phase(spec, ds, split, pcfg, result, &state, on_epoch);
      if (reg_halted) return false;
      // re-save so a completed checkpoint holds the restored best parameters
      save_regression_ckpt(reg_ckpt, reg_named(), state, state.curve.train.size());
    } else {
      run_regression_phase(spec, ds, split, pcfg, result, &state, nullptr);
    }
    detail::write_file(path("curves-regression.csv"), detail::curve_csv(state.curve));

    nlohmann::json rj = report_json(result, hash_);
    detail::write_file(path("report.json"), rj.dump(2) + "\n");
    detail::write_file(path("report.txt"), render_report_text(result.report, spec.id));
    return true;
  }

  void check_hash(const Checkpoint& ck, const std::string& p) const {
    if (ck.config_hash != hash_)
      throw ValidationError(p + " was written by a different config (hash " + ck.config_hash +
                            " vs " + hash_ + ")");
  }

  static LossCurve curve_from(const Checkpoint& ck) {
    LossCurve c;
    if (const DenseArray* a = ck.find("curve/train")) c.train = a->values();
    if (const DenseArray* a = ck.find("curve/val")) c.val = a->values();
    return c;
  }

  void save_translation_ckpt(const std::string& p, TranslationModel& model,
                             const LossCurve& curve, std::size_t epochs_done) const {
    Checkpoint ck;
    ck.topology = topology_of(model);
    ck.training = {{"epochs_done", epochs_done}};
    ck.config_hash = hash_;
    store_params(ck, "model/", model.named_params());
    ck.arrays.emplace_back("curve/train", detail::curve_array(curve.train));
    if (!curve.val.empty())
      ck.arrays.emplace_back("curve/val", detail::curve_array(curve.val));
    save_checkpoint(ck, p);
  }

  void save_regression_ckpt(const std::string& p,
                            std::vector<std::pair<std::string, Parameter*>> named,
                            const RegressionTrainState& state, std::size_t epochs_done) const {
    Checkpoint ck;
    ck.topology = {{"type", "regression-phase"}};
    ck.training = {{"epochs_done", epochs_done},
                   {"best_epoch", state.best_epoch},
                   {"best_val", state.best_params.empty() ? nlohmann::json(nullptr)
                                                          : nlohmann::json(state.best_val)}};
    ck.config_hash = hash_;
    for (auto& [name, param] : named) ck.arrays.emplace_back("model/" + name, param->value);
    ck.arrays.emplace_back("curve/train", detail::curve_array(state.curve.train));
    if (!state.curve.val.empty())
      ck.arrays.emplace_back("curve/val", detail::curve_array(state.curve.val));
    for (std::size_t i = 0; i < state.best_params.size(); ++i)
      ck.arrays.emplace_back("best/" + std::to_string(i), state.best_params[i]);
    save_checkpoint(ck, p);
  }

  RunConfig cfg_;
  std::string out_;
  std::string hash_;
};

// ---- the 26-spec grid ----

struct GridRow {
  std::string spec_id;
  bool ok = false;
  std::string error;
  std::size_t translation_stages = 0;
  nlohmann::json report;  // contents of report.json when ok
};

inline std::string grid_summary_text(const std::vector<GridRow>& rows) {
  using detail::pad;
  std::string out;
  out += pad("Spec", 30) + pad("Stages", 8) + pad("MAE", 10) + pad("B-Prec", 8) +
         pad("B-Rec", 8) + pad("B-F1", 8) + pad("7-Prec", 8) + pad("7-Rec", 8) + pad("7-F1", 8) +
         "Status\n";
  for (const GridRow& r : rows) {
    out += pad(r.spec_id, 30) + pad(std::to_string(r.translation_stages), 8);
    if (r.ok) {
      const nlohmann::json& rep = r.report.at("report");
      char mae[32];
      std::snprintf(mae, sizeof mae, "%.4f", rep.at("mae").get<double>());
      auto avg = [&](const char* block, const char* field) {
        return detail::fmt2(rep.at(block).at("avg_weighted").at(field).get<double>());
      };
      out += pad(mae, 10) + pad(avg("binary", "precision"), 8) + pad(avg("binary", "recall"), 8) +
             pad(avg("binary", "f1"), 8) + pad(avg("seven_class", "precision"), 8) +
             pad(avg("seven_class", "recall"), 8) + pad(avg("seven_class", "f1"), 8) + "ok\n";
    } else {
      out += pad("-", 10) + pad("-", 8) + pad("-", 8) + pad("-", 8) + pad("-", 8) + pad("-", 8) +
             pad("-", 8) + "FAILED: " + r.error + "\n";
    }
  }
  return out;
}

// Runs every manifest spec (optionally with a thread pool); each spec owns
// out_dir/<spec-id>/ and failures stay isolated to their row.
inline std::vector<GridRow> run_grid(const RunConfig& base, const std::string& out_dir,
                                     std::size_t jobs = 1) {
  namespace fs = std::filesystem;
  const std::vector<PipelineSpec> specs = enumerate_variations();
  std::vector<GridRow> rows(specs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      GridRow& row = rows[i];
      row.spec_id = specs[i].id;
      row.translation_stages = specs[i].translation_stage_count();
      RunConfig cfg = base;
      cfg.spec_id = specs[i].id;
      cfg.seed = mix_seed(base.seed, specs[i].id);
      cfg.pipeline.seed = cfg.seed;
      const std::string dir = (fs::path(out_dir) / specs[i].id).string();
      try {
        Runner runner(cfg, dir);
        runner.execute();
        row.report = nlohmann::json::parse(detail::read_file(runner.path("report.json")));
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const GridRow& r : rows) {
    nlohmann::json row{{"spec", r.spec_id},
                       {"translation_stages", r.translation_stages},
                       {"status", r.ok ? "ok" : "failed"}};
    if (r.ok)
      row["report"] = r.report.at("report");
    else
      row["error"] = r.error;
    summary.push_back(std::move(row));
  }
  fs::create_directories(out_dir);
  detail::write_file((fs::path(out_dir) / "grid-summary.json").string(),
                     summary.dump(2) + "\n");
  detail::write_file((fs::path(out_dir) / "grid-summary.txt").string(),
                     grid_summary_text(rows));
  return rows;
}

}  // namespace mmt
