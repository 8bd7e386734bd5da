#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dropdec/decoder.hpp"
#include "dropdec/errors.hpp"
#include "dropdec/eval.hpp"
#include "dropdec/model.hpp"
#include "dropdec/probability.hpp"
#include "dropdec/tiny_transformer.hpp"
#include "dropdec/uncertainty.hpp"

namespace dropdec::io {

using json = nlohmann::ordered_json;

// Rounds to 9 significant digits by a text round-trip, so every real in an
// output document has one canonical representation regardless of how it
// was computed.
inline double real9(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return std::strtod(buf, nullptr);
}

inline std::string join_tokens(const Vocabulary& vocab,
                               const std::vector<TokenId>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += vocab.token(tokens[i]);
  }
  return out;
}

// Either backend the CLI can drive. ScriptedModel comes from a rule file;
// TinyTransformer is synthesized from a seed.
using AnyModel = std::variant<ScriptedModel, TinyTransformer>;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(path + ": cannot open file");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(where + ": " + e.what());
  }
}

inline const json& require_field(const json& obj, const char* name,
                                 const std::string& where) {
  if (!obj.is_object()) {
    throw LoadError(where + ": expected an object");
  }
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw LoadError(where + ": missing field '" + name + "'");
  }
  return *it;
}

inline std::vector<double> as_reals(const json& j, const std::string& where) {
  if (!j.is_array()) {
    throw LoadError(where + ": expected an array of reals");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw LoadError(where + ": expected an array of reals");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<std::string> as_strings(const json& j,
                                           const std::string& where) {
  if (!j.is_array()) {
    throw LoadError(where + ": expected an array of strings");
  }
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_string()) {
      throw LoadError(where + ": expected an array of strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

// "any" (or an absent field) means unconstrained; otherwise a list of
// visual position indices.
inline std::optional<std::vector<std::size_t>> as_position_constraint(
    const json& rule, const char* name, const std::string& where) {
  auto it = rule.find(name);
  if (it == rule.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) {
    if (it->get<std::string>() == "any") return std::nullopt;
    throw LoadError(where + "." + name + ": expected \"any\" or an index list");
  }
  if (!it->is_array()) {
    throw LoadError(where + "." + name + ": expected \"any\" or an index list");
  }
  std::vector<std::size_t> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number_unsigned()) {
      throw LoadError(where + "." + name +
                      ": indices must be non-negative integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

inline ProbDist as_dist(const json& j, const std::string& where) {
  try {
    return ProbDist(as_reals(j, where));
  } catch (const ValidationError& e) {
    throw LoadError(where + ": " + e.what());
  }
}

inline ScriptedModel load_scripted(const json& doc, const std::string& path) {
  const auto vocab_tokens =
      as_strings(require_field(doc, "vocab", path), path + ": vocab");
  Vocabulary vocab = [&] {
    try {
      return Vocabulary(vocab_tokens);
    } catch (const ValidationError& e) {
      throw LoadError(path + ": vocab: " + e.what());
    }
  }();

  const json& n_visual_field = require_field(doc, "n_visual", path);
  if (!n_visual_field.is_number_unsigned()) {
    throw LoadError(path + ": n_visual must be a non-negative integer");
  }
  const std::size_t n_visual = n_visual_field.get<std::size_t>();

  const json& proj_field = require_field(doc, "visual_projections", path);
  if (!proj_field.is_array() || proj_field.size() != n_visual) {
    throw LoadError(path + ": visual_projections must be an array of " +
                    std::to_string(n_visual) + " rows");
  }
  std::vector<ProbDist> projections;
  projections.reserve(n_visual);
  for (std::size_t i = 0; i < proj_field.size(); ++i) {
    projections.push_back(as_dist(
        proj_field[i], path + ": visual_projections[" + std::to_string(i) +
                           "]"));
  }

  std::vector<ScriptedRule> rules;
  if (auto it = doc.find("rules"); it != doc.end()) {
    if (!it->is_array()) {
      throw LoadError(path + ": rules must be an array");
    }
    rules.reserve(it->size());
    for (std::size_t r = 0; r < it->size(); ++r) {
      const json& rule = (*it)[r];
      const std::string where = path + ": rules[" + std::to_string(r) + "]";
      if (!rule.is_object()) {
        throw LoadError(where + ": expected an object");
      }
      auto required_visible =
          as_position_constraint(rule, "required_visible", where);
      auto required_masked =
          as_position_constraint(rule, "required_masked", where);
      std::vector<TokenId> prefix;
      if (auto pit = rule.find("prefix"); pit != rule.end()) {
        for (const std::string& tok : as_strings(*pit, where + ".prefix")) {
          auto id = vocab.find(tok);
          if (!id) {
            throw LoadError(where + ".prefix: unknown token '" + tok + "'");
          }
          prefix.push_back(*id);
        }
      }
      rules.push_back(ScriptedRule{
          std::move(required_visible), std::move(required_masked),
          std::move(prefix),
          as_dist(require_field(rule, "dist", where), where + ".dist")});
    }
  }

  ProbDist default_dist = as_dist(require_field(doc, "default_dist", path),
                                  path + ": default_dist");
  try {
    return ScriptedModel(std::move(vocab), std::move(projections),
                         std::move(rules), std::move(default_dist));
  } catch (const std::runtime_error& e) {
    throw LoadError(path + ": " + e.what());
  }
}

inline TinyTransformer load_tiny(const json& doc, const std::string& path) {
  const json& seed_field = require_field(doc, "seed", path);
  if (!seed_field.is_number_unsigned()) {
    throw LoadError(path + ": seed must be a non-negative integer");
  }
  std::size_t n_visual = 16;
  if (auto it = doc.find("n_visual"); it != doc.end()) {
    if (!it->is_number_unsigned()) {
      throw LoadError(path + ": n_visual must be a non-negative integer");
    }
    n_visual = it->get<std::size_t>();
  }
  return TinyTransformer(seed_field.get<std::uint64_t>(), n_visual);
}

}  // namespace detail

// Loads a backend description. A top-level "type": "tiny_transformer"
// selects the synthetic transformer (fields: seed, optional n_visual);
// anything else is read as a scripted model file.
inline AnyModel load_model(const std::string& path) {
  const json doc = detail::parse_json(detail::read_file(path), path);
  if (!doc.is_object()) {
    throw LoadError(path + ": expected a top-level object");
  }
  if (auto it = doc.find("type"); it != doc.end()) {
    if (!it->is_string()) {
      throw LoadError(path + ": type must be a string");
    }
    const std::string type = it->get<std::string>();
    if (type == "tiny_transformer") {
      return detail::load_tiny(doc, path);
    }
    if (type != "scripted") {
      throw LoadError(path + ": unknown model type '" + type + "'");
    }
  }
  return detail::load_scripted(doc, path);
}

// One JSON record per line: image_id, mentioned_objects,
// ground_truth_objects. Blank lines are allowed; anything else that does
// not parse names its line number.
inline std::vector<eval::CaptionRecord> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(path + ": cannot open file");
  }
  std::vector<eval::CaptionRecord> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const json rec = detail::parse_json(line, where);
    if (!rec.is_object()) {
      throw LoadError(where + ": expected an object");
    }
    const json& id_field = detail::require_field(rec, "image_id", where);
    if (!id_field.is_string()) {
      throw LoadError(where + ": image_id must be a string");
    }
    try {
      corpus.push_back(eval::CaptionRecord::make(
          id_field.get<std::string>(),
          detail::as_strings(
              detail::require_field(rec, "mentioned_objects", where),
              where + ": mentioned_objects"),
          detail::as_strings(
              detail::require_field(rec, "ground_truth_objects", where),
              where + ": ground_truth_objects")));
    } catch (const ValidationError& e) {
      throw LoadError(where + ": " + e.what());
    }
  }
  return corpus;
}

inline json summary_to_json(const UncertaintySummary& summary) {
  json doc;
  doc["positions"] = json::array();
  for (const auto& row : summary.rows) {
    json r;
    r["index"] = row.index;
    r["u_ale"] = real9(row.u_ale);
    r["u_epi"] = real9(row.u_epi);
    doc["positions"].push_back(std::move(r));
  }
  doc["mean_u_ale"] = real9(summary.mean_u_ale);
  doc["mean_u_epi"] = real9(summary.mean_u_epi);
  doc["u_total"] = real9(summary.u_total);
  return doc;
}

inline json trace_to_json(const GenerationTrace& trace,
                          const Vocabulary& vocab) {
  json doc;
  doc["steps"] = json::array();
  for (const StepTrace& step : trace.steps) {
    json s;
    s["step"] = step.step;
    s["y_init"] =
        step.y_init ? json(vocab.token(*step.y_init)) : json(nullptr);
    s["relevant_set"] = step.relevant_set;
    s["masks"] = json::array();
    for (const auto& keep : step.masks) {
      std::string bits(keep.size(), '0');
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) bits[i] = '1';
      }
      s["masks"].push_back(std::move(bits));
    }
    s["candidates"] = json::array();
    for (const CandidateOutcome& c : step.candidates) {
      json cand;
      cand["k"] = c.candidate_index + 1;  // schedule numbering starts at 1
      cand["token"] = vocab.token(c.token);
      cand["drop_count"] = c.drop_count;
      s["candidates"].push_back(std::move(cand));
    }
    s["chosen"] = vocab.token(step.chosen);
    s["tie_broken"] = step.tie_broken;
    doc["steps"].push_back(std::move(s));
  }
  doc["final_text"] = join_tokens(vocab, trace.final_tokens);
  return doc;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw LoadError(path + ": cannot open file for writing");
  }
  out << content;
  if (!out) {
    throw LoadError(path + ": write failed");
  }
}

}  // namespace dropdec::io
