#pragma once

// The model gallery: space definitions in models/<NAME>.json and their
// oracle tables in models/<NAME>.oracles.json.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/space.hpp"
#include "finsler/tensors.hpp"

#ifndef FINSLER_MODELS_DIR
#define FINSLER_MODELS_DIR "models"
#endif

namespace finsler {

inline const std::vector<std::string>& modelNames() {
  static const std::vector<std::string> names{"E2",     "GAUSS2",       "RANDERS2", "NBRANDERS2",
                                              "SPHERE2", "S2xR_RANDERS", "FLATLEAF3"};
  return names;
}

inline std::string defaultModelsDir() {
  if (const char* env = std::getenv("FINSLER_MODELS_DIR")) return env;
  return FINSLER_MODELS_DIR;
}

struct ModelEntry {
  FinslerSpace space;
  nlohmann::json oracles = nlohmann::json::object();

  bool has(const std::string& key) const { return oracles.contains(key) && !oracles[key].is_null(); }
  const nlohmann::json& section(const std::string& key) const { return oracles.at(key); }

  // Named closed-form oracle from the table, e.g. "d(0,e1)".
  const nlohmann::json& oracle(const std::string& name) const {
    for (const auto& o : oracles.at("oracles"))
      if (o.at("name") == name) return o;
    throw FinslerError(ErrorCode::kUnknownModel, "no oracle named " + name + " for " + space.name());
  }
};

inline nlohmann::json readJsonFile(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw FinslerError(ErrorCode::kIoError, "cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FinslerError(ErrorCode::kParseError, p.string() + ": " + e.what());
  }
}

inline FinslerSpace loadSpaceFile(const std::string& path, bool validate = true) {
  FinslerSpace s = FinslerSpace::fromJson(readJsonFile(path));
  if (validate) validateSpace(s);
  return s;
}

inline ModelEntry loadModel(const std::string& name, const std::string& dir = defaultModelsDir(),
                            bool validate = true) {
  const auto& names = modelNames();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw FinslerError(ErrorCode::kUnknownModel, "unknown model " + name);
  const std::filesystem::path base(dir);
  ModelEntry m;
  m.space = FinslerSpace::fromJson(readJsonFile(base / (name + ".json")));
  if (validate) validateSpace(m.space);
  const auto oraclePath = base / (name + ".oracles.json");
  if (std::filesystem::exists(oraclePath)) m.oracles = readJsonFile(oraclePath);
  return m;
}

// Helpers for reading vectors and boxes out of oracle tables. Entries may be
// constant expressions such as "pi/2".
inline double jsonConstant(const nlohmann::json& j) {
  if (!j.is_string()) return j.get<double>();
  const Expression e = Expression::parse(j.get<std::string>(), 0, false);
  return e.eval<double>(nullptr, nullptr);
}

inline Vec jsonVec(const nlohmann::json& j) {
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = jsonConstant(j[i]);
  return v;
}

inline Box jsonBox(const nlohmann::json& j) { return Box{jsonVec(j.at("lower")), jsonVec(j.at("upper"))}; }

// "inf" or a number.
inline double jsonParameter(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return jsonConstant(j);
  }
  return j.get<double>();
}

}  // namespace finsler
