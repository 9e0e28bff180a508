#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mmt/checkpoint.hpp"
#include "mmt/config.hpp"

#include "grad_suite.hpp"

using namespace mmt;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
  Rng rng(21);
  TranslationModel m = TranslationModel::init_discrete(CellKind::lstm, 2, 4, 3, 6, 4, true, rng);
  Checkpoint ck;
  ck.topology = topology_of(m);
  ck.training = {{"epochs_done", 7}, {"best_val", 0.123456789012345}};
  ck.config_hash = "deadbeefcafef00d";
  store_params(ck, "model/", m.named_params());

  std::string p1 = temp_path("mmt_ck1.ckpt");
  std::string p2 = temp_path("mmt_ck2.ckpt");
  save_checkpoint(ck, p1);
  Checkpoint back = load_checkpoint(p1);
  save_checkpoint(back, p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(back.config_hash == ck.config_hash);
  CHECK(back.training.at("epochs_done") == 7);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("a model rebuilt from its topology and arrays behaves identically") {
  Rng rng(22);
  TranslationModel m = TranslationModel::init_continuous(CellKind::gru, 2, 4, 3, 2, true, rng);
  Checkpoint ck;
  ck.topology = topology_of(m);
  ck.training = nlohmann::json::object();
  store_params(ck, "model/", m.named_params());
  std::string p = temp_path("mmt_ck3.ckpt");
  save_checkpoint(ck, p);

  Checkpoint loaded = load_checkpoint(p);
  TranslationModel rebuilt = translation_from_topology(loaded.topology);
  restore_params(loaded, "model/", rebuilt.named_params());

  DenseArray src = gradsuite::random_signed({4, 3}, rng);
  EncodedRepresentation e1 = encode(src, m);
  EncodedRepresentation e2 = encode(src, rebuilt);
  CHECK(e1.states.values() == e2.states.values());
  DenseArray out1 = decode_continuous_greedy(m, e1, 3);
  DenseArray out2 = decode_continuous_greedy(rebuilt, e2, 3);
  CHECK(out1.values() == out2.values());
  std::remove(p.c_str());
}

TEST_CASE("a regression head round-trips through its topology") {
  Rng rng(23);
  RegressionHead h = RegressionHead::init(CellKind::lstm, 1, 5, 3, true, rng);
  Checkpoint ck;
  ck.topology = topology_of(h);
  ck.training = nlohmann::json::object();
  store_params(ck, "model/", h.named_params());
  std::string p = temp_path("mmt_ck4.ckpt");
  save_checkpoint(ck, p);
  Checkpoint loaded = load_checkpoint(p);
  RegressionHead back = head_from_topology(loaded.topology);
  restore_params(loaded, "model/", back.named_params());
  DenseArray seq = gradsuite::random_signed({4, 3}, rng);
  CHECK(predict_score(h, seq) == predict_score(back, seq));
  std::remove(p.c_str());
}

TEST_CASE("restore_params reports missing and mismatched arrays") {
  Rng rng(24);
  RegressionHead h = RegressionHead::init(CellKind::gru, 1, 4, 2, false, rng);
  Checkpoint ck;
  ck.topology = topology_of(h);
  ck.training = nlohmann::json::object();
  CHECK_THROWS_WITH_AS(restore_params(ck, "model/", h.named_params()),
                       doctest::Contains("missing array"), ParseError);
}

TEST_CASE("load_checkpoint rejects garbage") {
  std::string p = temp_path("mmt_ck5.ckpt");
  {
    std::ofstream f(p, std::ios::binary);
    f << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(load_checkpoint(p), ParseError);
  std::remove(p.c_str());
}

TEST_CASE("run config serialization echoes every field and hashes stably") {
  RunConfig c;
  c.spec_id = "s2s-T-to-V";
  c.seed = 42;
  c.synthetic = SyntheticSpec{};
  nlohmann::json j = to_json(c);
  CHECK(j.contains("translation"));
  CHECK(j.contains("regression"));
  CHECK(j["translation"].contains("epochs"));
  CHECK(j["regression"]["attention"] == false);
  CHECK(j["translation"]["attention"] == true);

  RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  back.seed = 43;
  CHECK(config_hash(back) != config_hash(c));
}
