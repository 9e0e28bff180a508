#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmt/array.hpp"
#include "mmt/random.hpp"
#include "mmt/seq2seq.hpp"

namespace mmt {

enum class Modality : std::uint8_t { text, audio, video };

inline char modality_letter(Modality m) {
  switch (m) {
    case Modality::text: return 'T';
    case Modality::audio: return 'A';
    case Modality::video: return 'V';
  }
  return '?';
}

inline Modality modality_from_letter(char c) {
  switch (c) {
    case 'T': case 't': return Modality::text;
    case 'A': case 'a': return Modality::audio;
    case 'V': case 'v': return Modality::video;
  }
  throw ParseError(std::string("unknown modality letter: ") + c);
}

// One modality's word-aligned feature sequence. Text rows additionally carry
// the token id of each word (ids 0 and 1 are reserved for the decoder's
// start/end symbols, so real tokens start at 2).
struct ModalitySequence {
  Modality modality = Modality::text;
  DenseArray features;  // [T, d]
  std::vector<int> token_ids;

  std::size_t steps() const { return features.rows(); }
  std::size_t dim() const { return features.rank() == 2 ? features.shape()[1] : 0; }
};

struct AlignedSegment {
  std::string id;
  ModalitySequence text, audio, video;
  double label = 0.0;

  const ModalitySequence& mod(Modality m) const {
    switch (m) {
      case Modality::text: return text;
      case Modality::audio: return audio;
      case Modality::video: return video;
    }
    throw Error("bad modality");
  }

  std::size_t steps() const { return text.steps(); }
};

struct DatasetInfo {
  int version = 1;
  std::size_t d_text = 0, d_audio = 0, d_video = 0;
  std::size_t vocab_size = 0;

  std::size_t dim(Modality m) const {
    switch (m) {
      case Modality::text: return d_text;
      case Modality::audio: return d_audio;
      case Modality::video: return d_video;
    }
    return 0;
  }
};

struct Dataset {
  DatasetInfo info;
  std::vector<AlignedSegment> segments;
};

// All invariant violations of one segment (empty result means valid).
inline std::vector<std::string> validate_segment(const AlignedSegment& s,
                                                 const DatasetInfo& info) {
  std::vector<std::string> out;
  const std::size_t t_text = s.text.steps();
  const std::size_t t_audio = s.audio.steps();
  const std::size_t t_video = s.video.steps();
  if (t_text == 0) out.push_back("segment " + s.id + ": empty sequence");
  if (t_text != t_audio || t_text != t_video) {
    std::ostringstream os;
    os << "segment " << s.id << ": alignment violation, steps text=" << t_text
       << " audio=" << t_audio << " video=" << t_video;
    out.push_back(os.str());
  }
  if (!(s.label >= -3.0 && s.label <= 3.0)) {
    std::ostringstream os;
    os << "segment " << s.id << ": label " << s.label << " outside [-3,3]";
    out.push_back(os.str());
  }
  const std::pair<const ModalitySequence*, const char*> mods[] = {
      {&s.text, "text"}, {&s.audio, "audio"}, {&s.video, "video"}};
  for (auto [seq, name] : mods) {
    const std::size_t want = info.dim(seq->modality);
    if (want != 0 && seq->dim() != want) {
      std::ostringstream os;
      os << "segment " << s.id << ": " << name << " dim " << seq->dim()
         << " != dataset dim " << want;
      out.push_back(os.str());
    }
    for (std::size_t t = 0; t < seq->steps(); ++t)
      for (std::size_t j = 0; j < seq->dim(); ++j)
        if (!std::isfinite(seq->features.at(t, j))) {
          std::ostringstream os;
          os << "segment " << s.id << ": non-finite feature (" << name << ", step " << t
             << ", index " << j << ")";
          out.push_back(os.str());
        }
  }
  if (s.text.token_ids.size() != t_text)
    out.push_back("segment " + s.id + ": token count " +
                  std::to_string(s.text.token_ids.size()) + " != steps " +
                  std::to_string(t_text));
  if (info.vocab_size > 0)
    for (std::size_t t = 0; t < s.text.token_ids.size(); ++t) {
      const int tok = s.text.token_ids[t];
      if (tok < kReservedTokens || static_cast<std::size_t>(tok) >= info.vocab_size) {
        std::ostringstream os;
        os << "segment " << s.id << ": token " << tok << " at step " << t
           << " outside [" << kReservedTokens << "," << info.vocab_size << ")";
        out.push_back(os.str());
      }
    }
  return out;
}

namespace detail {

inline nlohmann::json features_to_json(const DenseArray& f) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < f.rows(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < f.shape()[1]; ++j) row.push_back(f.at(t, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline DenseArray features_from_json(const nlohmann::json& rows, const char* what) {
  if (!rows.is_array() || rows.empty())
    throw ParseError(std::string(what) + ": features must be a non-empty array of rows");
  const std::size_t T = rows.size();
  const std::size_t d = rows[0].is_array() ? rows[0].size() : 0;
  if (d == 0) throw ParseError(std::string(what) + ": empty feature row");
  DenseArray out({T, d});
  for (std::size_t t = 0; t < T; ++t) {
    if (!rows[t].is_array() || rows[t].size() != d)
      throw ParseError(std::string(what) + ": ragged feature rows");
    for (std::size_t j = 0; j < d; ++j) out.at(t, j) = rows[t][j].get<double>();
  }
  return out;
}

}  // namespace detail

// Dataset file format: JSON lines. The first record is a header declaring
// dims, vocabulary size and format version; every following line is one
// segment. Doubles survive a save/load round trip exactly.
inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  nlohmann::json header{{"format", "mmt-dataset"},
                        {"version", ds.info.version},
                        {"d_text", ds.info.d_text},
                        {"d_audio", ds.info.d_audio},
                        {"d_video", ds.info.d_video},
                        {"vocab_size", ds.info.vocab_size}};
  out << header.dump() << "\n";
  for (const AlignedSegment& s : ds.segments) {
    nlohmann::json rec{{"id", s.id},
                       {"label", s.label},
                       {"text",
                        {{"tokens", s.text.token_ids},
                         {"features", detail::features_to_json(s.text.features)}}},
                       {"audio", {{"features", detail::features_to_json(s.audio.features)}}},
                       {"video", {{"features", detail::features_to_json(s.video.features)}}}};
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

// Parses without per-segment validation (the validate command wants every
// problem, not the first).
inline Dataset parse_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.contains("format") || j["format"] != "mmt-dataset")
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": missing dataset header (expected a first line with "
                         "format=mmt-dataset, version 1)");
      if (j.value("version", 0) != 1)
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": unsupported format version " +
                         std::to_string(j.value("version", 0)) + " (this build reads 1)");
      ds.info.version = j["version"].get<int>();
      ds.info.d_text = j.at("d_text").get<std::size_t>();
      ds.info.d_audio = j.at("d_audio").get<std::size_t>();
      ds.info.d_video = j.at("d_video").get<std::size_t>();
      ds.info.vocab_size = j.at("vocab_size").get<std::size_t>();
      have_header = true;
      continue;
    }
    try {
      AlignedSegment s;
      s.id = j.at("id").get<std::string>();
      s.label = j.at("label").get<double>();
      s.text.modality = Modality::text;
      s.text.token_ids = j.at("text").at("tokens").get<std::vector<int>>();
      s.text.features = detail::features_from_json(j.at("text").at("features"), "text");
      s.audio.modality = Modality::audio;
      s.audio.features = detail::features_from_json(j.at("audio").at("features"), "audio");
      s.video.modality = Modality::video;
      s.video.features = detail::features_from_json(j.at("video").at("features"), "video");
      ds.segments.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header && line_no > 0)
    throw ParseError(path + ": missing dataset header line");
  std::sort(ds.segments.begin(), ds.segments.end(),
            [](const AlignedSegment& a, const AlignedSegment& b) { return a.id < b.id; });
  return ds;
}

inline std::vector<std::string> validate_dataset(const Dataset& ds) {
  std::vector<std::string> out;
  for (const AlignedSegment& s : ds.segments) {
    auto problems = validate_segment(s, ds.info);
    out.insert(out.end(), problems.begin(), problems.end());
  }
  return out;
}

inline Dataset load_dataset(const std::string& path) {
  Dataset ds = parse_dataset(path);
  auto problems = validate_dataset(ds);
  if (!problems.empty()) throw ValidationError(problems.front());
  return ds;
}

// ---- splitting ----

struct DatasetSplit {
  std::vector<std::size_t> train, validation, test;  // indices into segments
  std::uint64_t seed = 0;
  double train_frac = 0.0, val_frac_of_train = 0.0;
};

inline std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

// Shuffles with the seed, carves test off the end, then carves validation
// out of the training pool. Sizes use round-half-up on the train pool first,
// then on the validation share.
inline DatasetSplit split_dataset(std::size_t n_segments, double train_frac,
                                  double val_frac_of_train, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0) ||
      !(val_frac_of_train > 0.0 && val_frac_of_train < 1.0))
    throw Error("split_dataset: fractions must be in (0,1)");
  if (n_segments == 0) throw Error("split_dataset: empty dataset");
  const std::size_t pool = round_half_up(static_cast<double>(n_segments) * train_frac);
  const std::size_t val = round_half_up(static_cast<double>(pool) * val_frac_of_train);
  const std::size_t train = pool - val;
  const std::size_t test = n_segments - pool;
  if (train == 0 || val == 0 || test == 0)
    throw Error("split_dataset: a split is empty for " + std::to_string(n_segments) +
                " segments (train " + std::to_string(train) + ", val " + std::to_string(val) +
                ", test " + std::to_string(test) + ")");
  std::vector<std::size_t> idx(n_segments);
  for (std::size_t i = 0; i < n_segments; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, "split"));
  rng.shuffle(idx);
  DatasetSplit out;
  out.seed = seed;
  out.train_frac = train_frac;
  out.val_frac_of_train = val_frac_of_train;
  out.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train));
  out.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(train),
                        idx.begin() + static_cast<std::ptrdiff_t>(pool));
  out.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(pool), idx.end());
  return out;
}

// ---- synthetic corpus ----

struct SyntheticSpec {
  std::size_t n_segments = 20;
  std::size_t t_min = 4, t_max = 10;
  std::size_t d_text = 6, d_audio = 4, d_video = 5;
  std::size_t vocab = 12;
  double coupling = 0.9;  // 0: modalities independent, 1: all driven by the latent
  std::uint64_t seed = 1;
};

// Latent-driven generator: a slow random walk drives every modality; feature
// i of each modality tracks latent channel (i mod L), blended against
// private noise by `coupling`. The label is a bounded function of the mean
// latent trajectory, and text tokens quantize the first latent channel.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_segments < 1 || spec.t_min < 1 || spec.t_max < spec.t_min)
    throw Error("generate_synthetic: bad sizes");
  if (spec.vocab < kReservedTokens + 2)
    throw Error("generate_synthetic: vocab must be at least " +
                std::to_string(kReservedTokens + 2));
  if (!(spec.coupling >= 0.0 && spec.coupling <= 1.0))
    throw Error("generate_synthetic: coupling must be in [0,1]");

  constexpr std::size_t kLatent = 3;
  Dataset ds;
  ds.info.d_text = spec.d_text;
  ds.info.d_audio = spec.d_audio;
  ds.info.d_video = spec.d_video;
  ds.info.vocab_size = spec.vocab;

  Rng rng(mix_seed(spec.seed, "synthetic"));
  // fixed per-feature gains so matched features stay comparable across
  // segments
  auto gains = [&](std::size_t d) {
    std::vector<double> g(d);
    for (auto& v : g) v = rng.uniform(0.5, 1.5);
    return g;
  };
  const std::vector<double> gain_t = gains(spec.d_text);
  const std::vector<double> gain_a = gains(spec.d_audio);
  const std::vector<double> gain_v = gains(spec.d_video);

  const int usable_tokens = static_cast<int>(spec.vocab) - kReservedTokens;
  for (std::size_t i = 0; i < spec.n_segments; ++i) {
    const std::size_t T =
        spec.t_min + static_cast<std::size_t>(rng.below(spec.t_max - spec.t_min + 1));
    std::vector<std::vector<double>> latent(T, std::vector<double>(kLatent));
    std::vector<double> s(kLatent, 0.0);
    double latent_sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t l = 0; l < kLatent; ++l) {
        s[l] = 0.7 * s[l] + 0.6 * rng.normal();
        latent[t][l] = s[l];
      }
      latent_sum += s[0];
    }

    AlignedSegment seg;
    char idbuf[24];
    std::snprintf(idbuf, sizeof idbuf, "syn-%05zu", i);
    seg.id = idbuf;
    seg.label = 3.0 * std::tanh(1.2 * latent_sum / static_cast<double>(T));

    auto fill = [&](ModalitySequence& m, Modality kind, std::size_t d,
                    const std::vector<double>& gain) {
      m.modality = kind;
      m.features = DenseArray({T, d});
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) {
          const double shared = latent[t][j % kLatent];
          const double noise = rng.normal();
          m.features.at(t, j) =
              gain[j] * (spec.coupling * shared + (1.0 - spec.coupling) * noise);
        }
    };
    fill(seg.text, Modality::text, spec.d_text, gain_t);
    fill(seg.audio, Modality::audio, spec.d_audio, gain_a);
    fill(seg.video, Modality::video, spec.d_video, gain_v);

    seg.text.token_ids.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const double u = 0.5 * (1.0 + std::tanh(latent[t][0]));  // (0,1)
      int bucket = static_cast<int>(u * usable_tokens);
      bucket = std::min(bucket, usable_tokens - 1);
      seg.text.token_ids[t] = kReservedTokens + bucket;
    }
    ds.segments.push_back(std::move(seg));
  }
  return ds;
}

}  // namespace mmt
