#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "mmt/data.hpp"
#include "mmt/pipeline.hpp"

namespace mmt {

// Full description of one run. Serialization always emits every field, so
// the config snapshot written into a run directory is self-describing even
// when the user relied on defaults.
struct RunConfig {
  std::string spec_id = "baseline-T";
  std::string dataset_path;               // empty when synthetic
  std::optional<SyntheticSpec> synthetic;  // generated in-process when set
  double train_frac = 0.6667;
  double val_frac_of_train = 0.1515;
  std::uint64_t split_seed = 0;  // 0 -> follows seed
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  std::size_t beam_width = 4;

  std::uint64_t effective_split_seed() const { return split_seed ? split_seed : seed; }
};

inline nlohmann::json to_json(const StageConfig& s) {
  nlohmann::json j{{"cell", cell_name(s.cell)},
                   {"layers", s.layers},
                   {"hidden", s.hidden},
                   {"learning_rate", s.learning_rate},
                   {"epochs", s.epochs},
                   {"attention", s.attention}};
  if (s.clip_norm)
    j["clip_norm"] = *s.clip_norm;
  else
    j["clip_norm"] = nullptr;
  return j;
}

inline StageConfig stage_from_json(const nlohmann::json& j, StageConfig base) {
  if (j.contains("cell")) base.cell = cell_from_name(j["cell"].get<std::string>());
  if (j.contains("layers")) base.layers = j["layers"].get<std::size_t>();
  if (j.contains("hidden")) base.hidden = j["hidden"].get<std::size_t>();
  if (j.contains("learning_rate")) base.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("epochs")) base.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("attention")) base.attention = j["attention"].get<bool>();
  if (j.contains("clip_norm") && !j["clip_norm"].is_null())
    base.clip_norm = j["clip_norm"].get<double>();
  return base;
}

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"segments", s.n_segments}, {"t_min", s.t_min},     {"t_max", s.t_max},
          {"d_text", s.d_text},       {"d_audio", s.d_audio}, {"d_video", s.d_video},
          {"vocab", s.vocab},         {"coupling", s.coupling}, {"seed", s.seed}};
}

inline SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  if (j.contains("segments")) s.n_segments = j["segments"].get<std::size_t>();
  if (j.contains("t_min")) s.t_min = j["t_min"].get<std::size_t>();
  if (j.contains("t_max")) s.t_max = j["t_max"].get<std::size_t>();
  if (j.contains("d_text")) s.d_text = j["d_text"].get<std::size_t>();
  if (j.contains("d_audio")) s.d_audio = j["d_audio"].get<std::size_t>();
  if (j.contains("d_video")) s.d_video = j["d_video"].get<std::size_t>();
  if (j.contains("vocab")) s.vocab = j["vocab"].get<std::size_t>();
  if (j.contains("coupling")) s.coupling = j["coupling"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  return s;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"spec", c.spec_id},
                   {"dataset", c.dataset_path},
                   {"split", {{"train_frac", c.train_frac},
                              {"val_frac_of_train", c.val_frac_of_train},
                              {"seed", c.split_seed}}},
                   {"seed", c.seed},
                   {"translation", to_json(c.pipeline.translation)},
                   {"regression", to_json(c.pipeline.regression)},
                   {"finetune_encoder", c.pipeline.finetune_encoder},
                   {"embed_dim", c.pipeline.embed_dim},
                   {"accum_steps", c.pipeline.accum_steps},
                   {"beam_width", c.beam_width}};
  if (c.synthetic)
    j["synthetic"] = to_json(*c.synthetic);
  else
    j["synthetic"] = nullptr;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("spec")) c.spec_id = j["spec"].get<std::string>();
  if (j.contains("dataset")) c.dataset_path = j["dataset"].get<std::string>();
  if (j.contains("synthetic") && !j["synthetic"].is_null())
    c.synthetic = synthetic_from_json(j["synthetic"]);
  if (j.contains("split")) {
    const nlohmann::json& s = j["split"];
    if (s.contains("train_frac")) c.train_frac = s["train_frac"].get<double>();
    if (s.contains("val_frac_of_train"))
      c.val_frac_of_train = s["val_frac_of_train"].get<double>();
    if (s.contains("seed")) c.split_seed = s["seed"].get<std::uint64_t>();
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("translation"))
    c.pipeline.translation = stage_from_json(j["translation"], c.pipeline.translation);
  if (j.contains("regression"))
    c.pipeline.regression = stage_from_json(j["regression"], c.pipeline.regression);
  if (j.contains("finetune_encoder"))
    c.pipeline.finetune_encoder = j["finetune_encoder"].get<bool>();
  if (j.contains("embed_dim")) c.pipeline.embed_dim = j["embed_dim"].get<std::size_t>();
  if (j.contains("accum_steps")) c.pipeline.accum_steps = j["accum_steps"].get<std::size_t>();
  if (j.contains("beam_width")) c.beam_width = j["beam_width"].get<std::size_t>();
  c.pipeline.seed = c.seed;
  return c;
}

inline std::string config_hash(const RunConfig& c) {
  const std::string canon = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace mmt
