#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace finsler {

enum class Status { kPass, kFail, kNotApplicable, kPreconditionUnsatisfied };

inline const char* statusName(Status s) {
  switch (s) {
    case Status::kPass: return "pass";
    case Status::kFail: return "fail";
    case Status::kNotApplicable: return "not-applicable";
    case Status::kPreconditionUnsatisfied: return "precondition-unsatisfied";
  }
  return "?";
}

struct Precondition {
  std::string name;
  bool holds = false;
};

struct VerificationReport {
  std::string invariant;
  std::string space;
  nlohmann::json sampleSpec = nlohmann::json::object();
  double maxResidual = 0.0;
  double budget = 0.0;
  Status status = Status::kFail;
  std::vector<Precondition> preconditions;
  nlohmann::json details = nlohmann::json::object();
  std::string note;

  bool preconditionsHold() const {
    return std::all_of(preconditions.begin(), preconditions.end(), [](const Precondition& p) { return p.holds; });
  }

  // pass iff the residual is under budget and every precondition holds; a
  // failed precondition is reported as such rather than as a failure.
  VerificationReport& finalize() {
    if (status == Status::kNotApplicable) return *this;
    if (!preconditionsHold())
      status = Status::kPreconditionUnsatisfied;
    else
      status = (std::isfinite(maxResidual) && maxResidual < budget) ? Status::kPass : Status::kFail;
    return *this;
  }

  static VerificationReport notApplicable(std::string invariant, std::string space, std::string why) {
    VerificationReport r;
    r.invariant = std::move(invariant);
    r.space = std::move(space);
    r.status = Status::kNotApplicable;
    r.note = std::move(why);
    return r;
  }

  nlohmann::json toJson() const {
    nlohmann::json j;
    j["invariant"] = invariant;
    j["space"] = space;
    j["sampleSpec"] = sampleSpec;
    j["maxResidual"] = std::isfinite(maxResidual) ? nlohmann::json(maxResidual) : nlohmann::json("inf");
    j["budget"] = budget;
    j["status"] = statusName(status);
    nlohmann::json pre = nlohmann::json::array();
    for (const auto& p : preconditions) pre.push_back({{"name", p.name}, {"holds", p.holds}});
    j["preconditions"] = pre;
    if (!details.empty()) j["details"] = details;
    if (!note.empty()) j["note"] = note;
    return j;
  }
};

inline nlohmann::json reportsToJson(const std::vector<VerificationReport>& rs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rs) a.push_back(r.toJson());
  return a;
}

inline std::string formatTable(const std::vector<VerificationReport>& rs) {
  std::size_t w0 = 9, w1 = 5;
  for (const auto& r : rs) {
    w0 = std::max(w0, r.invariant.size());
    w1 = std::max(w1, r.space.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto num = [](double v) {
    if (!std::isfinite(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return std::string(buf);
  };
  std::string out = pad("invariant", w0) + "  " + pad("model", w1) + "  " + pad("residual", 10) + "  " +
                    pad("budget", 10) + "  status\n";
  for (const auto& r : rs) {
    const bool shown = r.status == Status::kPass || r.status == Status::kFail;
    out += pad(r.invariant, w0) + "  " + pad(r.space, w1) + "  " + pad(shown ? num(r.maxResidual) : "-", 10) + "  " +
           pad(shown ? num(r.budget) : "-", 10) + "  " + statusName(r.status) + "\n";
  }
  return out;
}

inline bool anyFailed(const std::vector<VerificationReport>& rs) {
  return std::any_of(rs.begin(), rs.end(), [](const VerificationReport& r) { return r.status == Status::kFail; });
}

}  // namespace finsler
