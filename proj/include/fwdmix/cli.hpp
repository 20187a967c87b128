#pragma once

// Command-line front end. Each subcommand parses flags, calls the library and
// serializes the result; no statistics happen here.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fwdmix/data.hpp"
#include "fwdmix/error.hpp"
#include "fwdmix/families.hpp"
#include "fwdmix/gof.hpp"
#include "fwdmix/json_io.hpp"
#include "fwdmix/likelihood.hpp"
#include "fwdmix/lrt.hpp"
#include "fwdmix/parallel.hpp"
#include "fwdmix/simulate.hpp"
#include "fwdmix/version.hpp"

namespace fwdmix::cli {

enum class Impute { midpoint, jitter };

// A data file holds either day counts (`day,count` CSV or [{day,count}] JSON)
// or raw durations (`time` CSV or a JSON array of numbers). Counts are turned
// into times by the chosen imputation and also kept as recorded.
struct LoadedData {
  std::optional<DurationCounts> counts;
  DurationSample sample;
};

namespace detail {

inline LoadedData from_counts(DurationCounts counts, Impute impute, std::uint64_t seed) {
  auto s = impute == Impute::jitter ? impute_jitter(counts, seed) : impute_midpoint(counts);
  return {std::move(counts), std::move(s)};
}

inline std::vector<double> parse_time_rows(std::istream& is, std::size_t line) {
  std::vector<double> t;
  std::string row;
  while (std::getline(is, row)) {
    ++line;
    row = fwdmix::detail::trim(row);
    if (row.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(row, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != row.size()) throw ParseError("expected a number", line);
    t.push_back(v);
  }
  if (t.empty()) throw ParseError("no data rows after the header", line);
  return t;
}

}  // namespace detail

inline LoadedData load_data(const std::string& path, Impute impute, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto trimmed = fwdmix::detail::trim(text);

  if (!trimmed.empty() && trimmed.front() == '[') {
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error&) {
      return detail::from_counts(parse_counts_json(text), impute, seed);
    }
    if (!doc.empty() && doc.front().is_number()) {
      std::vector<double> t;
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_number()) {
          throw ParseError("entry " + std::to_string(i) + ": expected a number", 0);
        }
        t.push_back(doc[i].get<double>());
      }
      return {std::nullopt, DurationSample(std::move(t))};
    }
    return detail::from_counts(parse_counts_json(text), impute, seed);
  }

  std::istringstream is(text);
  std::string first;
  std::size_t header_line = 0;
  while (std::getline(is, first)) {
    ++header_line;
    first = fwdmix::detail::trim(first);
    if (!first.empty()) break;
  }
  if (first == "time") {
    return {std::nullopt, DurationSample(detail::parse_time_rows(is, header_line))};
  }
  std::istringstream again(text);
  return detail::from_counts(parse_counts_csv(again), impute, seed);
}

inline DurationSample load_sample(const std::string& path, Impute impute, std::uint64_t seed) {
  return load_data(path, impute, seed).sample;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = fwdmix::detail::trim(item);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) {
      throw CLI::ValidationError("list", "expected comma-separated numbers, got '" + s + "'");
    }
    out.push_back(v);
  }
  return out;
}

inline void write_error(std::ostream& err, const char* kind, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  j["version"] = std::string(kVersion);
  err << j.dump(2) << '\n';
}

// Exit codes: 0 success, 1 computation error (JSON diagnostic on `err`),
// 2 usage error.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixture forward-incubation model: fitting, LRT calibration and simulation",
               "fwdmix"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  unsigned threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: FWDMIX_THREADS or hardware concurrency)");

  const std::vector<std::string> families{"weibull", "gamma", "lognormal"};
  const std::vector<std::string> null_families{"weibull", "gamma"};

  std::string data;
  std::string family_name = "weibull";
  std::string impute_name = "midpoint";
  std::uint64_t seed = 1;
  std::size_t mc_draws = 1'000'000;
  std::string levels_text = "0.10,0.05,0.01";
  bool numeric = false;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", data, "counts (day,count) or raw times (time) file")->required();
    sub->add_option("--impute", impute_name, "imputation for day counts")
        ->check(CLI::IsMember({"midpoint", "jitter"}));
  };

  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit of the mixture");
  add_data(fit);
  fit->add_option("--family", family_name)->check(CLI::IsMember(families));
  fit->add_option("--seed", seed, "imputation seed");

  auto* test = app.add_subcommand("test", "likelihood-ratio test of exponential homogeneity");
  add_data(test);
  test->add_option("--family", family_name)->check(CLI::IsMember(null_families));
  test->add_option("--mc-draws", mc_draws, "limit draws for the p-value");
  test->add_option("--seed", seed, "imputation and Monte Carlo seed");
  test->add_option("--levels", levels_text, "levels for critical values");
  test->add_flag("--numeric-constants", numeric, "constants by quadrature at the fitted rate");

  auto* gof = app.add_subcommand("gof", "chi-square goodness of fit of the fitted mixture");
  add_data(gof);
  gof->add_option("--family", family_name)->check(CLI::IsMember(families));
  gof->add_option("--seed", seed, "imputation seed");
  std::string breaks_text;
  gof->add_option("--breaks", breaks_text, "interior interval break points");

  auto* nulldist = app.add_subcommand("nulldist", "critical values of the limit distribution");
  std::size_t table_draws = 10'000'000;
  nulldist->add_option("--family", family_name)->check(CLI::IsMember(null_families));
  nulldist->add_option("--levels", levels_text);
  nulldist->add_option("--mc-draws", table_draws);
  nulldist->add_option("--seed", seed);

  auto* power = app.add_subcommand("power", "asymptotic local power");
  double delta = 0.0;
  double p0 = 0.5;
  double level = 0.05;
  LocalPowerOptions lp;
  power->add_option("--family", family_name)->check(CLI::IsMember(null_families));
  power->add_option("--delta", delta, "local shape departure")->required();
  power->add_option("--p0", p0, "mixing weight under the alternative")->required();
  power->add_option("--level", level);
  power->add_option("--draws", lp.draws, "process draws");
  power->add_option("--mc-draws", lp.null_draws, "limit draws for the critical value");
  power->add_option("--grid-step", lp.grid_step, "p-grid step for the supremum");
  power->add_option("--seed", seed);

  auto* simulate = app.add_subcommand("simulate", "rejection-rate tables by simulation");
  std::string mode_text;
  std::size_t n = 100;
  std::optional<std::size_t> reps;
  std::string truth_text = "1,1,1";
  std::string qq_path;
  bool as_json = false;
  std::size_t sim_draws = 10'000'000;
  simulate->add_option("--mode", mode_text)->required()->check(CLI::IsMember({"type1", "power"}));
  simulate->add_option("--family", family_name)->check(CLI::IsMember(null_families));
  simulate->add_option("--n", n);
  simulate->add_option("--reps", reps, "replicates (default 10000 type1, 2000 power)");
  simulate->add_option("--truth", truth_text, "rate,shape,p");
  simulate->add_option("--levels", levels_text);
  simulate->add_option("--mc-draws", sim_draws, "limit draws for critical values");
  simulate->add_option("--seed", seed);
  simulate->add_option("--qq", qq_path, "write Q-Q data CSV here");
  simulate->add_flag("--json", as_json, "emit the table as JSON instead of CSV");

  auto* analyze = app.add_subcommand("analyze", "replicate jitter analysis of day counts");
  std::size_t analyze_reps = 1000;
  analyze->add_option("--data", data)->required();
  analyze->add_option("--family", family_name)->check(CLI::IsMember(null_families));
  analyze->add_option("--reps", analyze_reps);
  analyze->add_option("--seed", seed);
  analyze->add_option("--mc-draws", mc_draws);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return 2;
  }

  const FamilyKind family = parse_family(family_name);
  const Impute impute = impute_name == "jitter" ? Impute::jitter : Impute::midpoint;
  std::vector<double> levels;
  try {
    levels = parse_list(levels_text);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (fit->parsed()) {
      const auto s = load_sample(data, impute, seed);
      auto body = to_json(fit_full(s, family));
      body["n"] = s.n();
      body["provenance"] = to_string(s.provenance());
      out << stamped(body, s.seed()).dump(2) << '\n';
    } else if (test->parsed()) {
      const auto s = load_sample(data, impute, seed);
      TestOptions opt;
      opt.mc_draws = mc_draws;
      opt.seed = seed;
      opt.levels = levels;
      opt.numeric_constants = numeric;
      opt.threads = threads;
      out << stamped(to_json(run_lrt(s, family, opt)), seed).dump(2) << '\n';
    } else if (gof->parsed()) {
      const auto s = load_sample(data, impute, seed);
      const auto f = fit_full(s, family);
      std::optional<std::vector<double>> breaks;
      if (!breaks_text.empty()) breaks = parse_list(breaks_text);
      auto body = to_json(gof_test(s, f.model(), breaks));
      body["fit"] = to_json(f);
      out << stamped(body, s.seed()).dump(2) << '\n';
    } else if (nulldist->parsed()) {
      const auto dist =
          NullDistribution::sample(asymptotic_constants(family), table_draws, seed, threads);
      write_critical_values_csv(out, critical_values(dist, levels), table_draws, seed, family,
                                kVersion);
    } else if (power->parsed()) {
      lp.threads = threads;
      const auto c = asymptotic_constants(family);
      Json body;
      body["family"] = to_string(family);
      body["delta"] = delta;
      body["p0"] = p0;
      body["level"] = level;
      body["power"] = local_power(delta, p0, c, level, seed, lp);
      body["draws"] = lp.draws;
      body["mc_draws"] = lp.null_draws;
      body["grid_step"] = lp.grid_step;
      body["constants"] = to_json(c);
      out << stamped(body, seed).dump(2) << '\n';
    } else if (simulate->parsed()) {
      const auto truth = parse_list(truth_text);
      if (truth.size() != 3) {
        err << "usage error: --truth expects rate,shape,p\n";
        return 2;
      }
      SimConfig cfg;
      cfg.family = family;
      cfg.rate = truth[0];
      cfg.shape = truth[1];
      cfg.p = truth[2];
      cfg.n = n;
      cfg.replicates = reps.value_or(mode_text == "type1" ? 10'000 : 2'000);
      cfg.levels = levels;
      cfg.seed = seed;
      cfg.threads = threads;
      cfg.mc_draws = sim_draws;
      const auto table = mode_text == "type1" ? type1_table(cfg) : power_table(cfg);
      if (as_json) {
        out << stamped(to_json(table), seed).dump(2) << '\n';
      } else {
        write_sim_table_csv(out, table, kVersion);
      }
      if (!qq_path.empty()) {
        std::ofstream qq(qq_path);
        if (!qq) throw ParseError("cannot write " + qq_path, 0);
        const auto dist = NullDistribution::sample(asymptotic_constants(family), sim_draws,
                                                   null_seed(cfg), threads);
        write_qq_csv(qq, qq_data(table.statistics, dist), seed, kVersion);
      }
    } else if (analyze->parsed()) {
      AnalysisOptions opt;
      opt.mc_draws = mc_draws;
      opt.threads = threads;
      const auto counts = load_counts(data);
      out << stamped(to_json(replicate_analysis(counts, family, analyze_reps, seed, opt)), seed)
                 .dump(2)
          << '\n';
    }
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    write_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error(err, "error", e.what());
    return 1;
  }
  return 0;
}

}  // namespace fwdmix::cli
