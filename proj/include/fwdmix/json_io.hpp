#pragma once

// JSON views of the library's result types. Keys keep insertion order so
// output is stable across runs.

#include <cmath>
#include <string>

#include "json.hpp"

#include "fwdmix/data.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/gof.hpp"
#include "fwdmix/likelihood.hpp"
#include "fwdmix/lrt.hpp"
#include "fwdmix/simulate.hpp"
#include "fwdmix/version.hpp"

namespace fwdmix {

using Json = nlohmann::ordered_json;

namespace detail {
// NaN and infinities become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
}  // namespace detail

inline Json to_json(const FitResult& r) {
  Json j;
  j["family"] = to_string(r.family);
  j["rate"] = r.rate;
  j["shape"] = r.shape;
  j["p"] = r.p;
  j["loglik"] = detail::number(r.loglik);
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["tie_broken"] = r.tie_broken;
  if (!r.profile_trace.empty()) {
    Json tr = Json::array();
    for (const auto& [p, ll] : r.profile_trace) tr.push_back({p, detail::number(ll)});
    j["profile_trace"] = tr;
  }
  return j;
}

inline Json to_json(const AsymptoticConstants& c) {
  Json j;
  j["sigma11"] = c.sigma11;
  j["sigma12"] = c.sigma12;
  j["sigma22"] = c.sigma22;
  j["delta1"] = c.delta1;
  j["delta2"] = c.delta2;
  j["source"] = to_string(c.source);
  return j;
}

inline Json to_json(const LrtReport& r) {
  Json j;
  j["family"] = to_string(r.family);
  j["n"] = r.n;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["constants"] = to_json(r.constants);
  j["mc_draws"] = r.mc_draws;
  j["mc_seed"] = r.mc_seed;
  Json cv = Json::array();
  for (const auto& v : r.critical_values) cv.push_back({{"level", v.level}, {"quantile", v.quantile}});
  j["critical_values"] = cv;
  j["full"] = to_json(r.full);
  j["null"] = to_json(r.null);
  return j;
}

inline Json to_json(const GofReport& r) {
  Json j;
  j["statistic"] = r.statistic;
  j["k"] = r.k;
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  Json iv = Json::array();
  for (const auto& i : r.intervals) iv.push_back({i.lower, detail::number(i.upper)});
  j["intervals"] = iv;
  j["observed"] = r.observed;
  j["expected"] = r.expected;
  return j;
}

inline Json to_json(const SimTable& t) {
  Json j;
  j["mode"] = to_string(t.mode);
  j["family"] = to_string(t.config.family);
  j["truth"] = {{"rate", t.config.rate}, {"shape", t.config.shape}, {"p", t.config.p}};
  j["n"] = t.config.n;
  j["replicates"] = t.config.replicates;
  j["seed"] = t.config.seed;
  j["mc_draws"] = t.config.mc_draws;
  j["failures"] = t.failures;
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"level", r.level},
                    {"critical_value", detail::number(r.critical_value)},
                    {"rejections", r.rejections},
                    {"replicates", r.replicates},
                    {"rate", r.rate},
                    {"se", r.se}});
  }
  j["rows"] = rows;
  return j;
}

inline Json to_json(const ReplicateRecord& r) {
  Json j;
  j["index"] = r.index;
  j["seed"] = r.seed;
  j["ok"] = r.ok;
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["rate"] = r.full.rate;
  j["shape"] = r.full.shape;
  j["p"] = r.full.p;
  j["loglik"] = r.full.loglik;
  j["null_rate"] = r.null.rate;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  return j;
}

inline Json to_json(const ReplicateSummary& s) {
  Json j;
  j["family"] = to_string(s.family);
  j["n"] = s.n;
  j["replicates"] = s.replicates;
  j["seed"] = s.seed;
  j["failures"] = s.failures;
  j["mean_estimates"] = {{"rate", detail::number(s.mean_rate)},
                         {"shape", detail::number(s.mean_shape)},
                         {"p", detail::number(s.mean_p)}};
  j["statistic_range"] = {detail::number(s.min_statistic), detail::number(s.max_statistic)};
  j["constants"] = to_json(s.constants);
  j["mc_draws"] = s.mc_draws;
  j["mc_seed"] = s.mc_seed;
  if (s.midpoint) j["midpoint"] = to_json(*s.midpoint);
  Json recs = Json::array();
  for (const auto& r : s.records) recs.push_back(to_json(r));
  j["records"] = recs;
  return j;
}

// Stamps a report with the version and the seed that replays it.
inline Json stamped(Json body, std::optional<std::uint64_t> seed) {
  Json j;
  j["version"] = std::string(kVersion);
  if (seed) {
    j["seed"] = *seed;
  } else {
    j["seed"] = nullptr;
  }
  for (auto& [k, v] : body.items()) j[k] = v;
  return j;
}

}  // namespace fwdmix
