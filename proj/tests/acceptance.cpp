// Acceptance suite: every gate this toolkit must hold is checked here, one
// line of output per criterion. Run via ctest or directly; exits non-zero on
// any failure.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmt/checkpoint.hpp"
#include "mmt/config.hpp"
#include "mmt/pipeline.hpp"
#include "mmt/report.hpp"
#include "mmt/runner.hpp"

#include "grad_suite.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mmt;

namespace {

int failures = 0;
fs::path work;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void criterion(int number, const std::string& name, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  if (!detail.empty() && detail.rfind("FAIL", 0) == 0) ok = false;
  std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fail(const std::string& why) { return "FAIL: " + why; }

int shell(const std::string& args) {
  const std::string cmd = std::string(MMT_CLI_PATH) + " " + args + " > " +
                          (work / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// the frozen 8-segment overfit corpus
Dataset overfit_corpus() {
  SyntheticSpec sp;
  sp.n_segments = 8;
  sp.coupling = 1.0;
  sp.seed = 555;
  sp.t_min = 3;
  sp.t_max = 6;
  return generate_synthetic(sp);
}

// ---- criteria ----

std::string gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  auto results = gradsuite::full_suite(50, 20250808);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results)
    if (r.max_err > worst) {
      worst = r.max_err;
      worst_name = r.name;
    }
  const double elapsed = seconds_since(t0);
  if (worst >= 1e-6) return fail("max rel err " + std::to_string(worst) + " at " + worst_name);
  if (elapsed >= 120.0) return fail("runtime " + std::to_string(elapsed) + "s >= 120s");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu cases x 50 points, worst %.2e (%s)", results.size(),
                worst, worst_name.c_str());
  return buf;
}

std::string attention_invariants() {
  Rng rng(424242);
  for (std::size_t T = 1; T <= 64; ++T) {
    for (int rep = 0; rep < 5; ++rep) {
      Parameter w = Parameter::uniform({4}, 4, rng);
      DenseArray H = gradsuite::random_array({T, 4}, rng, -3.0, 3.0);
      for (std::size_t t = 0; t < T; ++t) H.at(t, 0) = 1.0;  // constant column for the shift
      auto [alpha, pooled] = attention_pool(H, w);
      double total = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        if (alpha[t] < 0.0) return fail("negative weight at T=" + std::to_string(T));
        total += alpha[t];
      }
      if (std::fabs(total - 1.0) > 1e-12)
        return fail("sum " + std::to_string(total) + " at T=" + std::to_string(T));
      Parameter w2(w.value);
      w2.value[0] += rng.uniform(-6.0, 6.0);  // shifts every logit equally
      auto [alpha2, pooled2] = attention_pool(H, w2);
      for (std::size_t t = 0; t < T; ++t)
        if (std::fabs(alpha[t] - alpha2[t]) > 1e-12)
          return fail("shift variance at T=" + std::to_string(T));
      for (std::size_t j = 0; j < 4; ++j)
        if (std::fabs(pooled[j] - pooled2[j]) > 1e-12)
          return fail("pooled vector moved under logit shift");
    }
  }
  return "T in 1..64, 5 draws each: simplex + shift invariance hold";
}

std::string beam_oracle() {
  // width 1 == stepwise greedy on 100 seeded models
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed * 7919);
    TranslationModel m = TranslationModel::init_discrete(
        CellKind::gru, 1, 3, 2, 3 + seed % 2, 2, seed % 3 == 0, rng);
    EncodedRepresentation e = encode(gradsuite::random_signed({2 + seed % 3, 2}, rng), m);
    BeamHypothesis beam1 = beam_search(m, e, 1, 5);
    oracle::GreedyResult greedy = oracle::greedy_decode(m, e, 5);
    if (beam1.tokens != greedy.tokens || std::fabs(beam1.log_prob - greedy.log_prob) > 1e-10)
      return fail("width-1 != greedy at seed " + std::to_string(seed));
  }
  // exhaustive equality for V <= 4, max_len <= 3, width >= V^max_len and the
  // greedy lower bound for every width
  std::size_t instances = 0;
  for (std::size_t V : {2u, 3u, 4u})
    for (std::size_t max_len : {1u, 2u, 3u})
      for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        Rng rng(seed * 104729 + V * 31 + max_len);
        TranslationModel m =
            TranslationModel::init_discrete(CellKind::lstm, 1, 3, 2, V, 2, seed % 2 == 0, rng);
        EncodedRepresentation e = encode(gradsuite::random_signed({2, 2}, rng), m);
        std::size_t width = 1;
        for (std::size_t i = 0; i < max_len; ++i) width *= V;
        BeamHypothesis wide = beam_search(m, e, width, max_len);
        oracle::GreedyResult best = oracle::exhaustive_best(m, e, max_len);
        if (wide.tokens != best.tokens || std::fabs(wide.log_prob - best.log_prob) > 1e-10)
          return fail("exhaustive mismatch at V=" + std::to_string(V) +
                      " L=" + std::to_string(max_len) + " seed " + std::to_string(seed));
        oracle::GreedyResult greedy = oracle::greedy_decode(m, e, max_len);
        for (std::size_t w = 1; w <= width; ++w) {
          BeamHypothesis hyp = beam_search(m, e, w, max_len);
          if (hyp.log_prob < greedy.log_prob - 1e-12)
            return fail("beam below greedy at width " + std::to_string(w));
        }
        ++instances;
      }
  return "100 greedy models, " + std::to_string(instances) + " exhaustive instances";
}

std::string overfit_bimodal() {
  const auto t0 = std::chrono::steady_clock::now();
  Dataset ds = overfit_corpus();
  PipelineSpec spec = spec_by_id("s2s-T-to-V");
  PipelineConfig cfg;
  cfg.seed = 99;
  cfg.translation.cell = CellKind::gru;
  cfg.translation.hidden = 32;
  TranslationModel m = make_stage_model(spec, 0, ds.info, cfg);
  std::vector<TranslationExample> train;
  for (const auto& s : ds.segments) train.push_back(make_stage1_example(spec, s));
  TrainOptions opt;
  opt.epochs = 250;  // 8 segments -> 2000 SGD steps
  opt.learning_rate = 0.6;
  opt.clip_norm = 5.0;
  opt.seed = phase_seed(cfg.seed, 0);
  LossCurve curve = train_translation(m, train, {}, opt);
  const double elapsed = seconds_since(t0);
  if (curve.train.back() >= 1e-2)
    return fail("loss " + std::to_string(curve.train.back()) + " after 2000 steps");
  if (elapsed >= 300.0) return fail("runtime over 5 minutes");
  char buf[96];
  std::snprintf(buf, sizeof buf, "T->V loss %.2e after 2000 steps", curve.train.back());
  return buf;
}

std::string overfit_hierarchical() {
  const auto t0 = std::chrono::steady_clock::now();
  Dataset ds = overfit_corpus();
  PipelineSpec spec = spec_by_id("hier-TA-to-V");
  PipelineConfig cfg;
  cfg.seed = 99;
  cfg.translation.hidden = 16;
  cfg.regression.hidden = 16;
  TranslationModel m1 = make_stage_model(spec, 0, ds.info, cfg);
  TranslationModel m2 = make_stage_model(spec, 1, ds.info, cfg);

  std::vector<TranslationExample> t1;
  for (const auto& s : ds.segments) t1.push_back(make_stage1_example(spec, s));
  TrainOptions o1;
  o1.epochs = 120;
  o1.learning_rate = 0.1;
  o1.seed = phase_seed(cfg.seed, 0);
  train_translation(m1, t1, {}, o1);

  std::vector<TranslationExample> t2;
  for (const auto& s : ds.segments) {
    TranslationExample ex;
    ex.source = encode(concat_modalities(s, spec.source).features, m1).states;
    ex.target = make_target(s, spec.target);
    t2.push_back(std::move(ex));
  }
  TrainOptions o2;
  o2.epochs = 120;
  o2.learning_rate = 0.1;
  o2.seed = phase_seed(cfg.seed, 1);
  train_translation(m2, t2, {}, o2);

  RegressionHead head = make_regression_head(spec, ds.info, cfg);
  std::vector<DenseArray> inputs;
  std::vector<double> labels;
  for (const auto& s : ds.segments) {
    EncodedRepresentation e1 = encode(concat_modalities(s, spec.source).features, m1);
    inputs.push_back(encode(e1.states, m2).states);
    labels.push_back(s.label);
  }
  TrainOptions o3;
  o3.epochs = 300;
  o3.learning_rate = 0.05;
  o3.seed = phase_seed(cfg.seed, 2);
  train_regressor(head, inputs, labels, {}, {}, o3);
  std::vector<double> preds;
  for (const auto& in : inputs) preds.push_back(predict_score(head, in));
  const double mae = mae_loss(preds, labels);
  const double elapsed = seconds_since(t0);
  if (mae >= 0.1) return fail("train MAE " + std::to_string(mae));
  if (elapsed >= 300.0) return fail("runtime over 5 minutes");
  char buf[96];
  std::snprintf(buf, sizeof buf, "3-phase run, final regression train MAE %.4f", mae);
  return buf;
}

std::string representation_transfer() {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticSpec sp;
    sp.n_segments = 40;
    sp.coupling = 0.9;
    sp.seed = 1000 + seed;
    Dataset ds = generate_synthetic(sp);
    DatasetSplit split = split_dataset(ds.segments.size(), 0.6667, 0.1515, seed);
    PipelineSpec spec = spec_by_id("s2s-T-to-V");
    PipelineConfig cfg;
    cfg.seed = seed;
    cfg.translation.hidden = 12;
    cfg.translation.epochs = 30;
    cfg.translation.learning_rate = 0.05;
    cfg.regression.hidden = 12;
    cfg.regression.epochs = 10;
    cfg.regression.learning_rate = 0.02;
    PipelineResult pretrained = run_bimodal(spec, ds, split, cfg);
    PipelineConfig random_cfg = cfg;
    random_cfg.translation.epochs = 0;  // random frozen encoder, same regression budget
    PipelineResult random_enc = run_bimodal(spec, ds, split, random_cfg);
    if (pretrained.report.mae <= random_enc.report.mae) ++wins;
  }
  const double elapsed = seconds_since(t0);
  if (wins < 7) return fail("pretrained encoder won only " + std::to_string(wins) + "/10 seeds");
  if (elapsed >= 900.0) return fail("runtime over 15 minutes");
  return "pretrained frozen encoder <= random frozen encoder in " + std::to_string(wins) +
         "/10 seeds";
}

std::string metrics_oracle() {
  Rng rng(31415);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(150);
    std::vector<int> preds, actuals;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(static_cast<int>(rng.below(7)) - 3);
      actuals.push_back(static_cast<int>(rng.below(7)) - 3);
    }
    MetricBlock got = prf1(confusion(preds, actuals, seven_classes()));
    oracle::NaivePrf want = oracle::naive_prf1(preds, actuals, seven_classes());
    for (std::size_t c = 0; c < 7; ++c)
      if (got.per_class[c].precision != want.precision[c] ||
          got.per_class[c].recall != want.recall[c] || got.per_class[c].f1 != want.f1[c] ||
          got.per_class[c].support != want.support[c])
        return fail("per-class mismatch at trial " + std::to_string(trial));
    if (got.weighted_precision != want.weighted_p || got.weighted_recall != want.weighted_r ||
        got.weighted_f1 != want.weighted_f)
      return fail("weighted average mismatch at trial " + std::to_string(trial));
  }

  // hand-derived confusion arithmetic: tp=3 fp=1 fn=2
  MetricBlock hand = prf1(confusion({1, 1, 1, 1, 0, 0, 0}, {1, 1, 1, 0, 1, 1, 0},
                                    binary_classes()));
  const ClassScores& pos = hand.per_class[1];
  if (std::fabs(pos.precision - 0.75) > 1e-15 || std::fabs(pos.recall - 0.6) > 1e-15 ||
      std::fabs(pos.f1 - 2.0 * 0.45 / 1.35) > 1e-15)
    return fail("hand case mismatch");

  // report layout: binary + 7-class blocks of Prec/Recall/F1 plus MAE
  EvaluationReport rep = evaluate_scores({1.2, -0.4, 0.0, 2.7}, {1.0, -1.0, 0.3, 3.0});
  const std::string text = render_report_text(rep, "layout-check");
  for (const char* token :
       {"MAE", "BINARY (-1,+1)", "7-CLASS (-3,...,+3)", "Prec", "Recall", "F1"})
    if (text.find(token) == std::string::npos)
      return fail(std::string("report text missing ") + token);
  nlohmann::json j = to_json(rep);
  for (const char* block : {"binary", "seven_class"})
    for (const char* field : {"precision", "recall", "f1"})
      if (!j.at(block).at("avg_weighted").contains(field))
        return fail("report json missing avg field");
  if (!j.contains("mae")) return fail("report json missing mae");
  if (j.at("seven_class").at("classes").size() != 7) return fail("7-class block incomplete");
  return "1000 random matrices exact, hand case and Table-2 layout verified";
}

std::string grid_completeness() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = work / "grid";
  fs::remove_all(dir);
  const std::string ds = (work / "grid-ds.jsonl").string();
  if (shell("generate --out " + ds + " --seed 3 --segments 8 --t-min 3 --t-max 6") != 0)
    return fail("generate failed");
  // default hyperparameters (hidden 64, 50 epochs per stage)
  if (shell("grid --dataset " + ds + " --seed 11 --out " + dir.string()) != 0)
    return fail("grid command failed");
  nlohmann::json summary = nlohmann::json::parse(slurp(dir / "grid-summary.json"));
  if (summary.size() != 26) return fail("summary has " + std::to_string(summary.size()) + " rows");
  bool has_ctv_cta = false;
  std::size_t ok_rows = 0;
  for (const auto& row : summary) {
    if (row.at("spec") == "s2s-concat-TV-to-concat-TA") has_ctv_cta = true;
    if (row.at("status") == "ok") ++ok_rows;
  }
  if (!has_ctv_cta) return fail("concat(T,V)->concat(T,A) row missing");
  if (ok_rows != 26) return fail(std::to_string(26 - ok_rows) + " rows failed");
  // baselines report zero stages, hierarchical rows two
  for (const auto& row : summary) {
    const std::string id = row.at("spec").get<std::string>();
    const std::size_t stages = row.at("translation_stages").get<std::size_t>();
    if (id.rfind("baseline-", 0) == 0 && stages != 0) return fail(id + " reports stages");
    if (id.rfind("hier-", 0) == 0 && stages != 2) return fail(id + " stage count");
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 1800.0) return fail("runtime over 30 minutes");
  char buf[96];
  std::snprintf(buf, sizeof buf, "26/26 rows ok on the 8-segment corpus in %.1fs", elapsed);
  return buf;
}

std::string determinism_persistence() {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string ds = (dir / "ds.jsonl").string();
  if (shell("generate --out " + ds + " --seed 5 --segments 10") != 0)
    return fail("generate failed");
  const std::string base = "run --spec s2s-T-to-V --dataset " + ds +
                           " --seed 7 --translation-epochs 3 --regression-epochs 3"
                           " --translation-hidden 8 --regression-hidden 8";
  if (shell(base + " --out " + (dir / "a").string()) != 0) return fail("run a failed");
  if (shell(base + " --out " + (dir / "b").string()) != 0) return fail("run b failed");
  if (slurp(dir / "a/report.json") != slurp(dir / "b/report.json"))
    return fail("identical seed+config reports differ");

  // checkpoint round trip byte-identity
  Checkpoint ck = load_checkpoint((dir / "a/phase-translation1.ckpt").string());
  save_checkpoint(ck, (dir / "roundtrip.ckpt").string());
  if (slurp(dir / "a/phase-translation1.ckpt") != slurp(dir / "roundtrip.ckpt"))
    return fail("checkpoint round trip not byte-identical");

  // halt at epoch boundaries, resume, compare
  if (shell(base + " --out " + (dir / "c").string() + " --halt-after-epochs 2") != 0)
    return fail("halted run failed");
  if (fs::exists(dir / "c/report.json")) return fail("halted run wrote a report");
  if (shell(base + " --out " + (dir / "c").string() + " --halt-after-epochs 3") != 0)
    return fail("second halted run failed");
  if (shell(base + " --out " + (dir / "c").string()) != 0) return fail("resume failed");
  if (slurp(dir / "a/report.json") != slurp(dir / "c/report.json"))
    return fail("resumed report differs from uninterrupted");
  return "bit-identical reports, byte-identical checkpoints, resume == uninterrupted";
}

std::string data_contract() {
  // split arithmetic for every dataset size 3..500
  for (std::size_t n = 3; n <= 500; ++n) {
    const std::size_t pool = round_half_up(n * 0.6667);
    const std::size_t val = round_half_up(pool * 0.1515);
    const std::size_t train = pool - val;
    const std::size_t test = n - pool;
    if (train == 0 || val == 0 || test == 0) {
      try {
        split_dataset(n, 0.6667, 0.1515, 77);
        return fail("expected empty-split error at n=" + std::to_string(n));
      } catch (const Error&) {
        continue;
      }
    }
    DatasetSplit s = split_dataset(n, 0.6667, 0.1515, 77);
    if (s.train.size() != train || s.validation.size() != val || s.test.size() != test)
      return fail("size mismatch at n=" + std::to_string(n));
    std::vector<int> seen(n, 0);
    for (auto part : {&s.train, &s.validation, &s.test})
      for (std::size_t idx : *part) ++seen[idx];
    for (std::size_t i = 0; i < n; ++i)
      if (seen[i] != 1) return fail("not a partition at n=" + std::to_string(n));
  }

  // loader round trip identity
  SyntheticSpec sp;
  sp.n_segments = 15;
  sp.seed = 2718;
  Dataset ds = generate_synthetic(sp);
  const std::string p1 = (work / "roundtrip1.jsonl").string();
  const std::string p2 = (work / "roundtrip2.jsonl").string();
  save_dataset(ds, p1);
  Dataset back = load_dataset(p1);
  save_dataset(back, p2);
  if (slurp(p1) != slurp(p2)) return fail("save/load/save not byte-stable");
  if (back.segments.size() != ds.segments.size()) return fail("segment count changed");
  for (std::size_t i = 0; i < ds.segments.size(); ++i) {
    if (back.segments[i].id != ds.segments[i].id ||
        back.segments[i].label != ds.segments[i].label ||
        back.segments[i].text.features != ds.segments[i].text.features ||
        back.segments[i].audio.features != ds.segments[i].audio.features ||
        back.segments[i].video.features != ds.segments[i].video.features ||
        back.segments[i].text.token_ids != ds.segments[i].text.token_ids)
      return fail("round trip altered segment " + ds.segments[i].id);
  }

  // alignment violations rejected with the segment named
  Dataset bad = generate_synthetic(sp);
  DenseArray& a = bad.segments[4].audio.features;
  DenseArray shorter({a.rows() - 1, a.shape()[1]});
  for (std::size_t t = 0; t + 1 < a.rows(); ++t)
    for (std::size_t j = 0; j < a.shape()[1]; ++j) shorter.at(t, j) = a.at(t, j);
  a = shorter;
  const std::string p3 = (work / "misaligned.jsonl").string();
  save_dataset(bad, p3);
  try {
    load_dataset(p3);
    return fail("misaligned dataset loaded");
  } catch (const ValidationError& e) {
    if (std::string(e.what()).find(bad.segments[4].id) == std::string::npos)
      return fail("alignment error does not name the segment");
  }
  return "split arithmetic 3..500, round-trip identity, alignment rejection";
}

}  // namespace

int main() {
  work = fs::temp_directory_path() / ("mmt_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  criterion(1, "gradient suite", gradient_suite);
  criterion(2, "attention invariants", attention_invariants);
  criterion(3, "beam-search oracle", beam_oracle);
  criterion(4, "overfit smoke test (bimodal T->V)", overfit_bimodal);
  criterion(4, "overfit smoke test (hierarchical)", overfit_hierarchical);
  criterion(5, "representation transfer", representation_transfer);
  criterion(6, "metrics oracle", metrics_oracle);
  criterion(7, "grid completeness", grid_completeness);
  criterion(8, "determinism and persistence", determinism_persistence);
  criterion(9, "data contract", data_contract);

  if (failures == 0) {
    std::printf("all acceptance criteria passed\n");
    fs::remove_all(work);
  } else {
    std::printf("%d criteria FAILED (artifacts kept in %s)\n", failures, work.string().c_str());
  }
  return failures == 0 ? 0 : 1;
}
