#pragma once

// Integer-day duration counts, their two imputation schemes, and the
// replicate analysis that refits each jittered copy of the data.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fwdmix/error.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/likelihood.hpp"
#include "fwdmix/lrt.hpp"
#include "fwdmix/parallel.hpp"
#include "fwdmix/random.hpp"

namespace fwdmix {

struct DayCount {
  std::int64_t day;
  std::int64_t count;
};

class DurationCounts {
 public:
  // Entries are stored sorted by day.
  explicit DurationCounts(std::vector<DayCount> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const DayCount& a, const DayCount& b) { return a.day < b.day; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].day < 0) throw DomainError("days must be non-negative");
      if (entries_[i].count < 1) throw DomainError("counts must be at least 1");
      if (i > 0 && entries_[i].day == entries_[i - 1].day) {
        throw DomainError("duplicate day " + std::to_string(entries_[i].day));
      }
      n_ += entries_[i].count;
    }
    if (entries_.empty()) throw DomainError("no duration counts");
  }

  const std::vector<DayCount>& entries() const { return entries_; }
  std::int64_t n() const { return n_; }

 private:
  std::vector<DayCount> entries_;
  std::int64_t n_ = 0;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::int64_t parse_int_field(const std::string& field, std::size_t line) {
  const auto f = trim(field);
  std::int64_t v = 0;
  const auto* end = f.data() + f.size();
  auto [ptr, ec] = std::from_chars(f.data(), end, v);
  if (f.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("expected an integer, got '" + f + "'",
                     line);
  }
  return v;
}

// Shared checks for both input formats; `label` names the offending entry.
inline void add_entry(std::vector<DayCount>& out, std::map<std::int64_t, std::size_t>& seen,
                      std::int64_t day, std::int64_t count, std::size_t line,
                      const std::string& label) {
  const std::string where = label.empty() ? std::string() : label + ": ";
  if (day < 0) throw ParseError(where + "negative day " + std::to_string(day), line);
  if (count < 0) throw ParseError(where + "negative count " + std::to_string(count), line);
  if (count == 0) throw ParseError(where + "count must be at least 1", line);
  if (auto it = seen.find(day); it != seen.end()) {
    throw ParseError(where + "duplicate day " + std::to_string(day) + " (first seen on line " +
                         std::to_string(it->second) + ")",
                     line);
  }
  seen.emplace(day, line);
  out.push_back({day, count});
}

}  // namespace detail

// CSV with header `day,count`. Blank lines are skipped.
inline DurationCounts parse_counts_csv(std::istream& in) {
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  std::vector<DayCount> out;
  std::map<std::int64_t, std::size_t> seen;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::trim(raw);
    if (text.empty()) continue;
    if (!header) {
      std::string h;
      for (char ch : text) {
        if (ch != ' ' && ch != '\t') h.push_back(ch);
      }
      if (h != "day,count") {
        throw ParseError("expected header 'day,count'", line);
      }
      header = true;
      continue;
    }
    const auto comma = text.find(',');
    if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
      throw ParseError("expected two fields 'day,count'",
                       line);
    }
    const auto day = detail::parse_int_field(text.substr(0, comma), line);
    const auto count = detail::parse_int_field(text.substr(comma + 1), line);
    detail::add_entry(out, seen, day, count, line, "");
  }
  if (!header) throw ParseError("empty input: no header line", line);
  if (out.empty()) throw ParseError("no data rows after the header", line);
  return DurationCounts(std::move(out));
}

// JSON array of {"day": i, "count": c}. The reported line is that of the
// offending element's opening brace.
inline DurationCounts parse_counts_json(const std::string& text) {
  if (detail::trim(text).empty()) throw ParseError("empty input", 0);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(
                              std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    throw ParseError("malformed JSON", line);
  }
  if (!doc.is_array()) throw ParseError("expected a JSON array of {day, count}", 1);

  // Line of each top-level element, found by a light scan of the text.
  std::vector<std::size_t> element_line;
  {
    std::size_t line = 1;
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    for (char ch : text) {
      if (ch == '\n') ++line;
      if (in_string) {
        if (escape) {
          escape = false;
        } else if (ch == '\\') {
          escape = true;
        } else if (ch == '"') {
          in_string = false;
        }
        continue;
      }
      if (ch == '"') {
        in_string = true;
      } else if (ch == '{' || ch == '[') {
        if (depth == 1) element_line.push_back(line);
        ++depth;
      } else if (ch == '}' || ch == ']') {
        --depth;
      }
    }
  }

  std::vector<DayCount> out;
  std::map<std::int64_t, std::size_t> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    // Scalar elements are not tracked; fall back to no line then.
    const std::size_t line = element_line.size() == doc.size() ? element_line[i] : 0;
    const std::string where = "entry " + std::to_string(i);
    const auto& e = doc[i];
    if (!e.is_object() || !e.contains("day") || !e.contains("count") ||
        !e["day"].is_number_integer() || !e["count"].is_number_integer()) {
      throw ParseError(where + "expected {\"day\": int, \"count\": int}", line);
    }
    detail::add_entry(out, seen, e["day"].get<std::int64_t>(), e["count"].get<std::int64_t>(),
                      line, where);
  }
  if (out.empty()) throw ParseError("no entries in JSON array", 1);
  return DurationCounts(std::move(out));
}

enum class CountsFormat { automatic, csv, json };

inline DurationCounts load_counts(const std::string& path,
                                  CountsFormat format = CountsFormat::automatic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (format == CountsFormat::automatic) {
    const auto t = detail::trim(text);
    const bool by_ext = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
    format = (by_ext || (!t.empty() && t.front() == '[')) ? CountsFormat::json : CountsFormat::csv;
  }
  if (format == CountsFormat::json) return parse_counts_json(text);
  std::istringstream is(text);
  return parse_counts_csv(is);
}

// Count c at day i becomes c Uniform(i, i+1) draws. Draw j of day i uses the
// stream keyed by (seed, i, j), so the row order of the input is irrelevant.
inline DurationSample impute_jitter(const DurationCounts& counts, std::uint64_t seed) {
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(counts.n()));
  for (const auto& e : counts.entries()) {
    for (std::int64_t j = 0; j < e.count; ++j) {
      CounterRng rng(stream_key(seed, static_cast<std::uint64_t>(e.day),
                                static_cast<std::uint64_t>(j)));
      t.push_back(static_cast<double>(e.day) + rng.uniform());
    }
  }
  return DurationSample(std::move(t), Provenance::jitter, seed);
}

inline DurationSample impute_midpoint(const DurationCounts& counts) {
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(counts.n()));
  for (const auto& e : counts.entries()) {
    t.insert(t.end(), static_cast<std::size_t>(e.count), static_cast<double>(e.day) + 0.5);
  }
  return DurationSample(std::move(t), Provenance::midpoint);
}

struct ReplicateRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;  // imputation seed
  bool ok = false;
  std::string error;
  FitResult full;
  FitResult null;
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct AnalysisOptions {
  std::size_t mc_draws = 1'000'000;
  unsigned threads = 0;
  bool include_midpoint = true;
  FitOptions fit{.p_grid = 50, .max_iterations = 200, .rel_tol = 1e-10,
                 .max_polish_rounds = 100, .keep_trace = false};
};

struct ReplicateSummary {
  FamilyKind family = FamilyKind::weibull;
  std::int64_t n = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t failures = 0;
  double mean_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_shape = std::numeric_limits<double>::quiet_NaN();
  double mean_p = std::numeric_limits<double>::quiet_NaN();
  double min_statistic = std::numeric_limits<double>::quiet_NaN();
  double max_statistic = std::numeric_limits<double>::quiet_NaN();
  AsymptoticConstants constants;
  std::size_t mc_draws = 0;
  std::uint64_t mc_seed = 0;
  std::vector<ReplicateRecord> records;
  std::optional<ReplicateRecord> midpoint;
};

// Fits one imputed sample and records the outcome instead of throwing.
inline ReplicateRecord analyse_sample(const DurationSample& s, FamilyKind family,
                                      const NullDistribution& dist, const FitOptions& fit) {
  ReplicateRecord rec;
  try {
    rec.null = fit_null(s, family);
    rec.full = fit_full(s, family, fit);
    rec.statistic = lrt_from_logliks(rec.full.loglik, rec.null.loglik);
    rec.p_value = dist.p_value(rec.statistic);
    rec.ok = true;
  } catch (const Error& e) {
    rec.error = e.what();
  }
  return rec;
}

// Replicate r imputes with seed stream_key(seed, r). One null distribution,
// drawn with `seed`, serves every replicate's p-value.
inline ReplicateSummary replicate_analysis(const DurationCounts& counts, FamilyKind family,
                                           std::size_t reps, std::uint64_t seed,
                                           const AnalysisOptions& opt = {}) {
  if (reps < 1) throw DomainError("reps must be at least 1");
  require_null_family(family);
  ReplicateSummary out;
  out.family = family;
  out.n = counts.n();
  out.replicates = reps;
  out.seed = seed;
  out.constants = asymptotic_constants(family);
  out.mc_draws = opt.mc_draws;
  out.mc_seed = seed;
  const auto dist = NullDistribution::sample(out.constants, opt.mc_draws, seed, opt.threads);

  out.records.resize(reps);
  parallel_for(
      reps, opt.threads,
      [&](std::size_t r) {
        const std::uint64_t s = stream_key(seed, r);
        out.records[r] = analyse_sample(impute_jitter(counts, s), family, dist, opt.fit);
        out.records[r].index = r;
        out.records[r].seed = s;
      },
      1);

  double sr = 0.0, sa = 0.0, sp = 0.0;
  std::size_t ok = 0;
  for (const auto& rec : out.records) {
    if (!rec.ok) {
      ++out.failures;
      continue;
    }
    ++ok;
    sr += rec.full.rate;
    sa += rec.full.shape;
    sp += rec.full.p;
    if (!(rec.statistic >= out.min_statistic)) out.min_statistic = rec.statistic;
    if (!(rec.statistic <= out.max_statistic)) out.max_statistic = rec.statistic;
  }
  if (ok > 0) {
    out.mean_rate = sr / static_cast<double>(ok);
    out.mean_shape = sa / static_cast<double>(ok);
    out.mean_p = sp / static_cast<double>(ok);
  }
  if (opt.include_midpoint) {
    out.midpoint = analyse_sample(impute_midpoint(counts), family, dist, opt.fit);
  }
  return out;
}

}  // namespace fwdmix
