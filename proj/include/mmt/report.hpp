#pragma once

#include <cstdio>
#include <string>

#include <json.hpp>

#include "mmt/metrics.hpp"
#include "mmt/pipeline.hpp"

namespace mmt {

inline nlohmann::json to_json(const MetricBlock& b) {
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassScores& c : b.per_class)
    classes.push_back({{"class", c.label},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
  return {{"classes", classes},
          {"avg_weighted",
           {{"precision", b.weighted_precision},
            {"recall", b.weighted_recall},
            {"f1", b.weighted_f1}}},
          {"avg_macro",
           {{"precision", b.macro_precision},
            {"recall", b.macro_recall},
            {"f1", b.macro_f1}}},
          {"total", b.total}};
}

inline nlohmann::json to_json(const EvaluationReport& r) {
  return {{"mae", r.mae}, {"binary", to_json(r.binary)}, {"seven_class", to_json(r.seven_class)}};
}

inline nlohmann::json to_json(const LossCurve& c) {
  return {{"train", c.train}, {"val", c.val}};
}

inline nlohmann::json report_json(const PipelineResult& r, const std::string& config_hash) {
  nlohmann::json stages = nlohmann::json::array();
  for (const StageRecord& s : r.translation_curves)
    stages.push_back({{"name", s.name}, {"curve", to_json(s.curve)}});
  stages.push_back({{"name", r.regression_curve.name.empty() ? "regression"
                                                             : r.regression_curve.name},
                    {"curve", to_json(r.regression_curve.curve)}});
  return {{"spec", r.spec.id},
          {"kind", pipeline_kind_name(r.spec.kind)},
          {"translation_stages", r.translation_curves.size()},
          {"report", to_json(r.report)},
          {"final_train_mae", r.final_train_mae},
          {"stages", stages},
          {"config_hash", config_hash}};
}

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  while (s.size() < width) s.push_back(' ');
  return s;
}

}  // namespace detail

// Table-form rendering: one headline row of binary and 7-class
// Prec/Recall/F1 plus MAE, then per-class blocks with both averaging
// conventions spelled out.
inline std::string render_report_text(const EvaluationReport& r, const std::string& title) {
  using detail::fmt2;
  using detail::pad;
  std::string out;
  out += title + "\n";
  out += std::string(title.size(), '=') + "\n\n";
  char mae[64];
  std::snprintf(mae, sizeof mae, "MAE: %.6f\n\n", r.mae);
  out += mae;

  out += pad("", 26) + pad("BINARY (-1,+1)", 24) + "7-CLASS (-3,...,+3)\n";
  out += pad("", 26) + pad("Prec", 8) + pad("Recall", 8) + pad("F1", 8) + pad("Prec", 8) +
         pad("Recall", 8) + "F1\n";
  out += pad("AVG. (weighted)", 26) + pad(fmt2(r.binary.weighted_precision), 8) +
         pad(fmt2(r.binary.weighted_recall), 8) + pad(fmt2(r.binary.weighted_f1), 8) +
         pad(fmt2(r.seven_class.weighted_precision), 8) +
         pad(fmt2(r.seven_class.weighted_recall), 8) + fmt2(r.seven_class.weighted_f1) + "\n";
  out += pad("AVG. (macro)", 26) + pad(fmt2(r.binary.macro_precision), 8) +
         pad(fmt2(r.binary.macro_recall), 8) + pad(fmt2(r.binary.macro_f1), 8) +
         pad(fmt2(r.seven_class.macro_precision), 8) +
         pad(fmt2(r.seven_class.macro_recall), 8) + fmt2(r.seven_class.macro_f1) + "\n\n";

  auto block = [&](const char* name, const MetricBlock& b) {
    out += std::string(name) + " per class\n";
    out += pad("  Class", 10) + pad("Prec", 8) + pad("Recall", 8) + pad("F1", 8) + "Samples\n";
    for (const ClassScores& c : b.per_class) {
      out += pad("  " + std::to_string(c.label), 10) + pad(fmt2(c.precision), 8) +
             pad(fmt2(c.recall), 8) + pad(fmt2(c.f1), 8) + std::to_string(c.support) + "\n";
    }
    out += pad("  AVG.", 10) + pad(fmt2(b.weighted_precision), 8) +
           pad(fmt2(b.weighted_recall), 8) + pad(fmt2(b.weighted_f1), 8) +
           std::to_string(b.total) + "\n\n";
  };
  block("Binary", r.binary);
  block("7-class", r.seven_class);
  return out;
}

inline std::string render_report_text(const nlohmann::json& report_file) {
  // re-render a machine-readable report (as written by report_json)
  EvaluationReport r;
  const nlohmann::json& rep = report_file.at("report");
  r.mae = rep.at("mae").get<double>();
  auto block = [](const nlohmann::json& j) {
    MetricBlock b;
    for (const auto& c : j.at("classes")) {
      ClassScores s;
      s.label = c.at("class").get<int>();
      s.precision = c.at("precision").get<double>();
      s.recall = c.at("recall").get<double>();
      s.f1 = c.at("f1").get<double>();
      s.support = c.at("support").get<long>();
      b.per_class.push_back(s);
    }
    b.weighted_precision = j.at("avg_weighted").at("precision").get<double>();
    b.weighted_recall = j.at("avg_weighted").at("recall").get<double>();
    b.weighted_f1 = j.at("avg_weighted").at("f1").get<double>();
    b.macro_precision = j.at("avg_macro").at("precision").get<double>();
    b.macro_recall = j.at("avg_macro").at("recall").get<double>();
    b.macro_f1 = j.at("avg_macro").at("f1").get<double>();
    b.total = j.at("total").get<long>();
    return b;
  };
  r.binary = block(rep.at("binary"));
  r.seven_class = block(rep.at("seven_class"));
  return render_report_text(r, report_file.at("spec").get<std::string>());
}

}  // namespace mmt
