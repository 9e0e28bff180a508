#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmt/array.hpp"
#include "mmt/regression.hpp"
#include "mmt/seq2seq.hpp"

namespace mmt {

// Versioned checkpoint container: a magic tag, a JSON header (topology,
// training state, config hash, array directory), then the named arrays as
// little-endian 64-bit floats in directory order. Round-trips byte for byte.
struct Checkpoint {
  int version = 1;
  nlohmann::json topology;  // enough to rebuild the model without the config
  nlohmann::json training;  // epochs done, best validation loss, ...
  std::string config_hash;
  std::vector<std::pair<std::string, DenseArray>> arrays;

  const DenseArray* find(const std::string& name) const {
    for (const auto& [n, a] : arrays)
      if (n == name) return &a;
    return nullptr;
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'M', 'M', 'T', 'C', 'K', 'P', 'T', '\n'};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, a] : ck.arrays)
    dir.push_back({{"name", name}, {"shape", a.shape()}});
  nlohmann::json header{{"version", ck.version},
                        {"topology", ck.topology},
                        {"training", ck.training},
                        {"config_hash", ck.config_hash},
                        {"arrays", dir}};
  const std::string hjson = header.dump();
  std::string out;
  out.append(kCheckpointMagic, 8);
  detail::put_u32(out, static_cast<std::uint32_t>(ck.version));
  detail::put_u64(out, hjson.size());
  out += hjson;
  for (const auto& [name, a] : ck.arrays)
    for (std::size_t i = 0; i < a.size(); ++i)
      detail::put_u64(out, std::bit_cast<std::uint64_t>(a[i]));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 20 || in.compare(0, 8, kCheckpointMagic, 8) != 0)
    throw ParseError(path + ": not a checkpoint file");
  std::size_t pos = 8;
  Checkpoint ck;
  ck.version = static_cast<int>(detail::get_u32(in, pos));
  if (ck.version != 1)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(ck.version));
  const std::uint64_t hlen = detail::get_u64(in, pos);
  if (pos + hlen > in.size()) throw ParseError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.substr(pos, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }
  pos += hlen;
  ck.topology = header.at("topology");
  ck.training = header.at("training");
  ck.config_hash = header.at("config_hash").get<std::string>();
  for (const auto& entry : header.at("arrays")) {
    Shape shape = entry.at("shape").get<Shape>();
    DenseArray a(shape);
    if (pos + 8 * a.size() > in.size()) throw ParseError(path + ": truncated array data");
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = std::bit_cast<double>(detail::get_u64(in, pos));
    ck.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(a));
  }
  if (pos != in.size()) throw ParseError(path + ": trailing bytes");
  return ck;
}

// ---- model topologies ----

inline nlohmann::json topology_of(const TranslationModel& m) {
  nlohmann::json t{{"type", "translation"},
                   {"cell", cell_name(m.encoder.cell)},
                   {"layers", m.encoder.layers},
                   {"hidden", m.encoder.hidden},
                   {"source_dim", m.encoder.input_dim},
                   {"attention", m.use_attention}};
  if (m.target_kind == TargetKind::discrete) {
    t["target"] = {{"kind", "discrete"}, {"vocab", m.vocab}, {"embed_dim", m.embed_dim}};
  } else {
    t["target"] = {{"kind", "continuous"}, {"dim", m.target_dim}};
  }
  return t;
}

inline nlohmann::json topology_of(const RegressionHead& h) {
  return {{"type", "regression"},
          {"cell", cell_name(h.rnn.cell)},
          {"layers", h.rnn.layers},
          {"hidden", h.rnn.hidden},
          {"input_dim", h.rnn.input_dim},
          {"attention", h.use_attention}};
}

inline TranslationModel translation_from_topology(const nlohmann::json& t) {
  if (t.at("type") != "translation") throw ParseError("topology: not a translation model");
  Rng rng(0);  // values are overwritten by the checkpoint arrays
  const CellKind cell = cell_from_name(t.at("cell").get<std::string>());
  const auto layers = t.at("layers").get<std::size_t>();
  const auto hidden = t.at("hidden").get<std::size_t>();
  const auto source_dim = t.at("source_dim").get<std::size_t>();
  const bool attention = t.at("attention").get<bool>();
  const nlohmann::json& tgt = t.at("target");
  if (tgt.at("kind") == "discrete")
    return TranslationModel::init_discrete(cell, layers, hidden, source_dim,
                                           tgt.at("vocab").get<std::size_t>(),
                                           tgt.at("embed_dim").get<std::size_t>(), attention,
                                           rng);
  return TranslationModel::init_continuous(cell, layers, hidden, source_dim,
                                           tgt.at("dim").get<std::size_t>(), attention, rng);
}

inline RegressionHead head_from_topology(const nlohmann::json& t) {
  if (t.at("type") != "regression") throw ParseError("topology: not a regression head");
  Rng rng(0);
  return RegressionHead::init(cell_from_name(t.at("cell").get<std::string>()),
                              t.at("layers").get<std::size_t>(),
                              t.at("hidden").get<std::size_t>(),
                              t.at("input_dim").get<std::size_t>(),
                              t.at("attention").get<bool>(), rng);
}

inline void store_params(Checkpoint& ck, const std::string& prefix,
                         std::vector<std::pair<std::string, Parameter*>> named) {
  for (auto& [name, p] : named) ck.arrays.emplace_back(prefix + name, p->value);
}

inline void restore_params(const Checkpoint& ck, const std::string& prefix,
                           std::vector<std::pair<std::string, Parameter*>> named) {
  for (auto& [name, p] : named) {
    const DenseArray* a = ck.find(prefix + name);
    if (!a) throw ParseError("checkpoint: missing array " + prefix + name);
    if (a->shape() != p->value.shape())
      throw ParseError("checkpoint: array " + prefix + name + " has shape " +
                       shape_str(a->shape()) + ", model wants " +
                       shape_str(p->value.shape()));
    p->value = *a;
  }
}

}  // namespace mmt
