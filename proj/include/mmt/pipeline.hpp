#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmt/data.hpp"
#include "mmt/metrics.hpp"
#include "mmt/regression.hpp"
#include "mmt/seq2seq.hpp"

namespace mmt {

enum class PipelineKind : std::uint8_t {
  unimodal_baseline,
  concat_baseline,
  bimodal_translate,
  hierarchical,
  concat_to_one,
  one_to_concat,
  concat_to_concat,
};

inline const char* pipeline_kind_name(PipelineKind k) {
  switch (k) {
    case PipelineKind::unimodal_baseline: return "unimodal-baseline";
    case PipelineKind::concat_baseline: return "concat-baseline";
    case PipelineKind::bimodal_translate: return "bimodal-translate";
    case PipelineKind::hierarchical: return "hierarchical";
    case PipelineKind::concat_to_one: return "concat-to-one";
    case PipelineKind::one_to_concat: return "one-to-concat";
    case PipelineKind::concat_to_concat: return "concat-to-concat";
  }
  return "?";
}

// One experiment: what feeds the encoder, what the decoder reconstructs, and
// for the hierarchical kind the intermediate stage-1 target. Baselines have
// an empty target and no translation stage.
struct PipelineSpec {
  std::string id;
  PipelineKind kind = PipelineKind::unimodal_baseline;
  std::vector<Modality> source;
  std::vector<Modality> target;
  std::optional<Modality> hier_mid;  // hierarchical stage-1 target Y in X->Y, E_XY->Z

  std::size_t translation_stage_count() const {
    if (kind == PipelineKind::unimodal_baseline || kind == PipelineKind::concat_baseline)
      return 0;
    return kind == PipelineKind::hierarchical ? 2 : 1;
  }

  bool target_is_discrete() const {
    return target.size() == 1 && target[0] == Modality::text;
  }
};

inline std::string modality_list(const std::vector<Modality>& mods) {
  std::string out;
  for (Modality m : mods) out.push_back(modality_letter(m));
  return out;
}

// The frozen experiment grid: 3 unimodal baselines, 3 + 1 concat baselines,
// 6 bimodal translations, 6 hierarchical chains, 3 concat-pair-to-one, 2
// one-to-concat-pair, 2 concat-to-concat. 26 specs total; row order and ids
// are stable so reports map one-to-one onto them.
inline std::vector<PipelineSpec> enumerate_variations() {
  using M = Modality;
  std::vector<PipelineSpec> out;
  auto add = [&](std::string id, PipelineKind kind, std::vector<M> src, std::vector<M> tgt,
                 std::optional<M> mid = std::nullopt) {
    out.push_back(PipelineSpec{std::move(id), kind, std::move(src), std::move(tgt), mid});
  };
  add("baseline-T", PipelineKind::unimodal_baseline, {M::text}, {});
  add("baseline-A", PipelineKind::unimodal_baseline, {M::audio}, {});
  add("baseline-V", PipelineKind::unimodal_baseline, {M::video}, {});
  add("baseline-concat-TV", PipelineKind::concat_baseline, {M::text, M::video}, {});
  add("baseline-concat-TA", PipelineKind::concat_baseline, {M::text, M::audio}, {});
  add("baseline-concat-AV", PipelineKind::concat_baseline, {M::audio, M::video}, {});
  add("baseline-concat-TVA", PipelineKind::concat_baseline, {M::text, M::video, M::audio}, {});
  add("s2s-T-to-V", PipelineKind::bimodal_translate, {M::text}, {M::video});
  add("s2s-T-to-A", PipelineKind::bimodal_translate, {M::text}, {M::audio});
  add("s2s-A-to-T", PipelineKind::bimodal_translate, {M::audio}, {M::text});
  add("s2s-A-to-V", PipelineKind::bimodal_translate, {M::audio}, {M::video});
  add("s2s-V-to-T", PipelineKind::bimodal_translate, {M::video}, {M::text});
  add("s2s-V-to-A", PipelineKind::bimodal_translate, {M::video}, {M::audio});
  add("hier-TV-to-A", PipelineKind::hierarchical, {M::text}, {M::audio}, M::video);
  add("hier-TA-to-V", PipelineKind::hierarchical, {M::text}, {M::video}, M::audio);
  add("hier-AV-to-T", PipelineKind::hierarchical, {M::audio}, {M::text}, M::video);
  add("hier-AT-to-V", PipelineKind::hierarchical, {M::audio}, {M::video}, M::text);
  add("hier-VT-to-A", PipelineKind::hierarchical, {M::video}, {M::audio}, M::text);
  add("hier-VA-to-T", PipelineKind::hierarchical, {M::video}, {M::text}, M::audio);
  add("s2s-concat-TV-to-A", PipelineKind::concat_to_one, {M::text, M::video}, {M::audio});
  add("s2s-concat-AT-to-V", PipelineKind::concat_to_one, {M::audio, M::text}, {M::video});
  add("s2s-concat-VA-to-T", PipelineKind::concat_to_one, {M::video, M::audio}, {M::text});
  add("s2s-T-to-concat-AV", PipelineKind::one_to_concat, {M::text}, {M::audio, M::video});
  add("s2s-A-to-concat-TV", PipelineKind::one_to_concat, {M::audio}, {M::text, M::video});
  add("s2s-concat-TA-to-concat-TV", PipelineKind::concat_to_concat, {M::text, M::audio},
      {M::text, M::video});
  add("s2s-concat-TV-to-concat-TA", PipelineKind::concat_to_concat, {M::text, M::video},
      {M::text, M::audio});
  return out;
}

inline PipelineSpec spec_by_id(const std::string& id) {
  for (PipelineSpec& s : enumerate_variations())
    if (s.id == id) return s;
  throw Error("unknown pipeline spec id: " + id + " (run `mmt list` for the manifest)");
}

// ---- timestep concatenation (the baseline fusion) ----

struct ConcatenatedSequence {
  DenseArray features;  // [T, sum of dims]
  std::vector<Modality> parts;
  std::vector<std::size_t> offsets;  // feature offset of each part
};

inline ConcatenatedSequence concat_modalities(const AlignedSegment& seg,
                                              const std::vector<Modality>& which) {
  if (which.empty()) throw Error("concat_modalities: no modalities selected");
  std::size_t total = 0;
  const std::size_t T = seg.mod(which.front()).steps();
  for (Modality m : which) {
    const ModalitySequence& s = seg.mod(m);
    if (s.steps() != T)
      throw ValidationError(std::string("concat_modalities: alignment corruption in segment ") +
                            seg.id + ": " + modality_letter(which.front()) + " has " +
                            std::to_string(T) + " steps, " + modality_letter(m) + " has " +
                            std::to_string(s.steps()));
    total += s.dim();
  }
  ConcatenatedSequence out;
  out.parts = which;
  out.features = DenseArray({T, total});
  std::size_t off = 0;
  for (Modality m : which) {
    out.offsets.push_back(off);
    const ModalitySequence& s = seg.mod(m);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < s.dim(); ++j) out.features.at(t, off + j) = s.features.at(t, j);
    off += s.dim();
  }
  return out;
}

// ---- configuration ----

struct StageConfig {
  CellKind cell = CellKind::lstm;
  std::size_t layers = 1;
  std::size_t hidden = 64;
  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::optional<double> clip_norm;
  bool attention = true;  // decoder attention / attention pooling
};

struct PipelineConfig {
  StageConfig translation;  // applies to every translation stage
  StageConfig regression;
  bool finetune_encoder = false;  // unfreeze the upstream encoder in the regression phase
  std::size_t embed_dim = 0;      // discrete decoder input width; 0 means hidden size
  std::size_t accum_steps = 1;
  std::uint64_t seed = 0;

  PipelineConfig() {
    regression.attention = false;  // pooling attention is opt-in
    regression.learning_rate = 0.01;
  }
};

inline std::uint64_t phase_seed(std::uint64_t master, std::size_t phase_index) {
  return mix_seed(master, "phase-" + std::to_string(phase_index));
}

// Phase names for a spec, in execution order.
inline std::vector<std::string> phase_names(const PipelineSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec.translation_stage_count(); ++i)
    out.push_back("translation" + std::to_string(i + 1));
  out.push_back("regression");
  return out;
}

// ---- model construction (shared by in-memory runs and the CLI, so both
// build bit-identical models for a given seed) ----

inline TranslationModel make_stage_model(const PipelineSpec& spec, std::size_t stage,
                                         const DatasetInfo& info, const PipelineConfig& cfg) {
  const StageConfig& sc = cfg.translation;
  const std::size_t embed = cfg.embed_dim ? cfg.embed_dim : sc.hidden;
  Rng rng(mix_seed(phase_seed(cfg.seed, stage), "init"));
  auto dims_of = [&](const std::vector<Modality>& mods) {
    std::size_t total = 0;
    for (Modality m : mods) total += info.dim(m);
    return total;
  };
  if (spec.kind == PipelineKind::hierarchical) {
    if (stage == 0) {
      // X -> Y, both single modalities
      const Modality y = *spec.hier_mid;
      if (y == Modality::text)
        return TranslationModel::init_discrete(sc.cell, sc.layers, sc.hidden,
                                               dims_of(spec.source), info.vocab_size, embed,
                                               sc.attention, rng);
      return TranslationModel::init_continuous(sc.cell, sc.layers, sc.hidden,
                                               dims_of(spec.source), info.dim(y), sc.attention,
                                               rng);
    }
    // E_XY -> Z; the stage-2 encoder consumes stage-1 hidden states
    if (spec.target_is_discrete())
      return TranslationModel::init_discrete(sc.cell, sc.layers, sc.hidden, sc.hidden,
                                             info.vocab_size, embed, sc.attention, rng);
    return TranslationModel::init_continuous(sc.cell, sc.layers, sc.hidden, sc.hidden,
                                             dims_of(spec.target), sc.attention, rng);
  }
  if (spec.target_is_discrete())
    return TranslationModel::init_discrete(sc.cell, sc.layers, sc.hidden, dims_of(spec.source),
                                           info.vocab_size, embed, sc.attention, rng);
  return TranslationModel::init_continuous(sc.cell, sc.layers, sc.hidden, dims_of(spec.source),
                                           dims_of(spec.target), sc.attention, rng);
}

inline RegressionHead make_regression_head(const PipelineSpec& spec, const DatasetInfo& info,
                                           const PipelineConfig& cfg) {
  const StageConfig& sc = cfg.regression;
  const std::size_t phase = spec.translation_stage_count();
  Rng rng(mix_seed(phase_seed(cfg.seed, phase), "init"));
  std::size_t input_dim = 0;
  if (spec.translation_stage_count() == 0) {
    for (Modality m : spec.source) input_dim += info.dim(m);
  } else {
    input_dim = cfg.translation.hidden;  // encoder state sequence
  }
  return RegressionHead::init(sc.cell, sc.layers, sc.hidden, input_dim, sc.attention, rng);
}

// ---- training data assembly ----

inline TargetSequence make_target(const AlignedSegment& seg,
                                  const std::vector<Modality>& target_mods) {
  if (target_mods.size() == 1 && target_mods[0] == Modality::text)
    return TargetSequence::discrete(seg.text.token_ids);
  return TargetSequence::continuous(concat_modalities(seg, target_mods).features);
}

inline TranslationExample make_stage1_example(const PipelineSpec& spec,
                                              const AlignedSegment& seg) {
  TranslationExample ex;
  ex.source = concat_modalities(seg, spec.source).features;
  const std::vector<Modality> tgt =
      spec.kind == PipelineKind::hierarchical ? std::vector<Modality>{*spec.hier_mid}
                                              : spec.target;
  ex.target = make_target(seg, tgt);
  return ex;
}

// ---- results ----

struct StageRecord {
  std::string name;
  LossCurve curve;
};

struct PipelineResult {
  PipelineSpec spec;
  std::vector<StageRecord> translation_curves;  // one per translation stage
  StageRecord regression_curve;
  std::optional<TranslationModel> stage1, stage2;
  RegressionHead head;
  EvaluationReport report;
  double final_train_mae = 0.0;
};

namespace detail {

struct SplitView {
  std::vector<const AlignedSegment*> train, val, test;
};

inline SplitView split_view(const Dataset& ds, const DatasetSplit& split) {
  SplitView v;
  for (std::size_t i : split.train) v.train.push_back(&ds.segments[i]);
  for (std::size_t i : split.validation) v.val.push_back(&ds.segments[i]);
  for (std::size_t i : split.test) v.test.push_back(&ds.segments[i]);
  return v;
}

inline TrainOptions stage_options(const StageConfig& sc, std::uint64_t seed,
                                  std::size_t accum) {
  TrainOptions opt;
  opt.epochs = sc.epochs;
  opt.learning_rate = sc.learning_rate;
  opt.clip_norm = sc.clip_norm;
  opt.seed = seed;
  opt.accum_steps = accum;
  return opt;
}

// representation fed to the regression phase for one segment
inline DenseArray regression_input(const PipelineSpec& spec, const AlignedSegment& seg,
                                   PipelineResult& r) {
  if (spec.translation_stage_count() == 0)
    return concat_modalities(seg, spec.source).features;
  EncodedRepresentation e1 =
      encode(concat_modalities(seg, spec.source).features, *r.stage1, modality_list(spec.source));
  if (spec.kind != PipelineKind::hierarchical) return e1.states;
  EncodedRepresentation e2 = encode(e1.states, *r.stage2, "E_" + modality_list(spec.source));
  return e2.states;
}

}  // namespace detail

// Runs the regression phase (training + test evaluation) for any spec whose
// upstream stages are already trained in `result`.
inline void run_regression_phase(const PipelineSpec& spec, const Dataset& ds,
                                 const DatasetSplit& split, const PipelineConfig& cfg,
                                 PipelineResult& result,
                                 RegressionTrainState* state = nullptr,
                                 const std::function<bool(std::size_t, const LossCurve&)>& on_epoch = nullptr) {
  detail::SplitView view = detail::split_view(ds, split);
  const std::size_t phase = spec.translation_stage_count();
  TrainOptions opt =
      detail::stage_options(cfg.regression, phase_seed(cfg.seed, phase), cfg.accum_steps);
  opt.on_epoch = on_epoch;
  if (state) opt.start_epoch = state->curve.train.size();

  const bool finetune = cfg.finetune_encoder && phase > 0;
  TranslationModel* upstream =
      phase == 0 ? nullptr : (spec.kind == PipelineKind::hierarchical ? &*result.stage2
                                                                      : &*result.stage1);

  auto label_of = [](const AlignedSegment* s) { return s->label; };

  RegressorResult rr;
  if (!finetune) {
    // frozen upstream: precompute representations once
    std::vector<DenseArray> train_in, val_in;
    std::vector<double> train_y, val_y;
    for (const AlignedSegment* s : view.train) {
      train_in.push_back(detail::regression_input(spec, *s, result));
      train_y.push_back(label_of(s));
    }
    for (const AlignedSegment* s : view.val) {
      val_in.push_back(detail::regression_input(spec, *s, result));
      val_y.push_back(label_of(s));
    }
    rr = train_regressor(result.head, train_in, train_y, val_in, val_y, opt, state);
  } else {
    // gradients flow into the upstream encoder as well; for the hierarchical
    // spec that is the stage-2 encoder consuming precomputed E_XY
    std::vector<DenseArray> train_src, val_src;
    for (const AlignedSegment* s : view.train)
      train_src.push_back(spec.kind == PipelineKind::hierarchical
                              ? encode(concat_modalities(*s, spec.source).features,
                                       *result.stage1)
                                    .states
                              : concat_modalities(*s, spec.source).features);
    for (const AlignedSegment* s : view.val)
      val_src.push_back(spec.kind == PipelineKind::hierarchical
                            ? encode(concat_modalities(*s, spec.source).features, *result.stage1)
                                  .states
                            : concat_modalities(*s, spec.source).features);
    detail::MaeProblem prob;
    prob.train_count = train_src.size();
    prob.build_score = [&](Graph& g, std::size_t idx) {
      std::vector<Var> xs = sequence_constants(g, train_src[idx]);
      UnrolledRnn enc = unroll_rnn(g, upstream->encoder, xs);
      return score_vars(g, result.head, enc.top);
    };
    prob.train_label = [&, view](std::size_t idx) { return view.train[idx]->label; };
    prob.params = result.head.params();
    for (Parameter* p : upstream->encoder.params()) prob.params.push_back(p);
    prob.val_count = val_src.size();
    prob.val_predict = [&](std::size_t idx) {
      EncodedRepresentation e = encode(val_src[idx], upstream->encoder);
      return predict_score(result.head, e.states);
    };
    prob.val_label = [&, view](std::size_t idx) { return view.val[idx]->label; };
    rr = detail::run_mae_training(prob, opt, state);
  }
  result.regression_curve = StageRecord{"regression", rr.curve};
  if (rr.halted) return;

  // final evaluation on train and test with the retained parameters
  std::vector<double> train_preds, train_ys, test_preds, test_ys;
  for (const AlignedSegment* s : view.train) {
    train_preds.push_back(
        predict_score(result.head, detail::regression_input(spec, *s, result)));
    train_ys.push_back(s->label);
  }
  for (const AlignedSegment* s : view.test) {
    test_preds.push_back(predict_score(result.head, detail::regression_input(spec, *s, result)));
    test_ys.push_back(s->label);
  }
  result.final_train_mae = mae_loss(train_preds, train_ys);
  result.report = evaluate_scores(test_preds, test_ys);
}

// Shared single-translation-stage runner (bimodal and all concat variants).
inline PipelineResult run_bimodal(const PipelineSpec& spec, const Dataset& ds,
                                  const DatasetSplit& split, const PipelineConfig& cfg) {
  if (spec.translation_stage_count() != 1)
    throw Error("run_bimodal: spec " + spec.id + " is not a single-stage translation");
  detail::SplitView view = detail::split_view(ds, split);
  PipelineResult result;
  result.spec = spec;
  result.stage1 = make_stage_model(spec, 0, ds.info, cfg);
  result.head = make_regression_head(spec, ds.info, cfg);

  std::vector<TranslationExample> train, val;
  for (const AlignedSegment* s : view.train) train.push_back(make_stage1_example(spec, *s));
  for (const AlignedSegment* s : view.val) val.push_back(make_stage1_example(spec, *s));
  TrainOptions opt =
      detail::stage_options(cfg.translation, phase_seed(cfg.seed, 0), cfg.accum_steps);
  LossCurve curve = train_translation(*result.stage1, train, val, opt);
  result.translation_curves.push_back(StageRecord{"translation1", std::move(curve)});

  run_regression_phase(spec, ds, split, cfg, result);
  return result;
}

inline PipelineResult run_hierarchical(const PipelineSpec& spec, const Dataset& ds,
                                       const DatasetSplit& split, const PipelineConfig& cfg) {
  if (spec.kind != PipelineKind::hierarchical)
    throw Error("run_hierarchical: spec " + spec.id + " is not hierarchical");
  detail::SplitView view = detail::split_view(ds, split);
  PipelineResult result;
  result.spec = spec;
  result.stage1 = make_stage_model(spec, 0, ds.info, cfg);
  result.stage2 = make_stage_model(spec, 1, ds.info, cfg);
  result.head = make_regression_head(spec, ds.info, cfg);

  // Phase 1: X -> Y
  std::vector<TranslationExample> train1, val1;
  for (const AlignedSegment* s : view.train) train1.push_back(make_stage1_example(spec, *s));
  for (const AlignedSegment* s : view.val) val1.push_back(make_stage1_example(spec, *s));
  TrainOptions opt1 =
      detail::stage_options(cfg.translation, phase_seed(cfg.seed, 0), cfg.accum_steps);
  result.translation_curves.push_back(
      StageRecord{"translation1", train_translation(*result.stage1, train1, val1, opt1)});

  // Phase 2: E_XY -> Z over the frozen stage-1 encoder
  auto stage2_example = [&](const AlignedSegment& s) {
    TranslationExample ex;
    ex.source = encode(concat_modalities(s, spec.source).features, *result.stage1).states;
    ex.target = make_target(s, spec.target);
    return ex;
  };
  std::vector<TranslationExample> train2, val2;
  for (const AlignedSegment* s : view.train) train2.push_back(stage2_example(*s));
  for (const AlignedSegment* s : view.val) val2.push_back(stage2_example(*s));
  TrainOptions opt2 =
      detail::stage_options(cfg.translation, phase_seed(cfg.seed, 1), cfg.accum_steps);
  result.translation_curves.push_back(
      StageRecord{"translation2", train_translation(*result.stage2, train2, val2, opt2)});

  run_regression_phase(spec, ds, split, cfg, result);
  return result;
}

inline PipelineResult run_baseline(const PipelineSpec& spec, const Dataset& ds,
                                   const DatasetSplit& split, const PipelineConfig& cfg) {
  if (spec.translation_stage_count() != 0)
    throw Error("run_baseline: spec " + spec.id + " is not a baseline");
  PipelineResult result;
  result.spec = spec;
  result.head = make_regression_head(spec, ds.info, cfg);
  run_regression_phase(spec, ds, split, cfg, result);
  return result;
}

inline PipelineResult run_pipeline(const PipelineSpec& spec, const Dataset& ds,
                                   const DatasetSplit& split, const PipelineConfig& cfg) {
  switch (spec.kind) {
    case PipelineKind::unimodal_baseline:
    case PipelineKind::concat_baseline:
      return run_baseline(spec, ds, split, cfg);
    case PipelineKind::hierarchical:
      return run_hierarchical(spec, ds, split, cfg);
    default:
      return run_bimodal(spec, ds, split, cfg);
  }
}

// Dimension bookkeeping check: builds every model of the spec and pushes one
// dummy segment through all phases without training.
inline void dry_run_check(const PipelineSpec& spec, const DatasetInfo& info,
                          const PipelineConfig& cfg) {
  AlignedSegment seg;
  seg.id = "dry";
  const std::size_t T = 2;
  auto fill = [&](ModalitySequence& m, Modality kind, std::size_t d) {
    m.modality = kind;
    m.features = DenseArray::full({T, d}, 0.1);
  };
  fill(seg.text, Modality::text, info.d_text);
  fill(seg.audio, Modality::audio, info.d_audio);
  fill(seg.video, Modality::video, info.d_video);
  seg.text.token_ids.assign(T, kReservedTokens);
  seg.label = 0.0;

  PipelineResult r;
  r.spec = spec;
  DenseArray rep({1, 1});
  if (spec.translation_stage_count() == 0) {
    rep = concat_modalities(seg, spec.source).features;
  } else if (spec.kind == PipelineKind::hierarchical) {
    r.stage1 = make_stage_model(spec, 0, info, cfg);
    r.stage2 = make_stage_model(spec, 1, info, cfg);
    TranslationExample ex1 = make_stage1_example(spec, seg);
    Graph g1;
    g1.forward(translation_example_loss(g1, *r.stage1, ex1.source, ex1.target));
    EncodedRepresentation e1 = encode(ex1.source, *r.stage1);
    Graph g2;
    g2.forward(translation_example_loss(g2, *r.stage2, e1.states,
                                        make_target(seg, spec.target)));
    rep = encode(e1.states, *r.stage2).states;
  } else {
    r.stage1 = make_stage_model(spec, 0, info, cfg);
    TranslationExample ex = make_stage1_example(spec, seg);
    Graph g;
    g.forward(translation_example_loss(g, *r.stage1, ex.source, ex.target));
    rep = encode(ex.source, *r.stage1).states;
  }
  RegressionHead head = make_regression_head(spec, info, cfg);
  predict_score(head, rep);
}

}  // namespace mmt
