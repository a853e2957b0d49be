// risksim command line: fit → simulate → report.
//
// Exit codes: 0 success, 1 runtime failure (IO, failed fit), 2 usage or
// validation error, 3 VaR did not converge.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "risksim/errors.hpp"
#include "risksim/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace risksim;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInvalid = 2;
constexpr int kNotConverged = 3;

// Fit results are merged into an existing config so hand-written sections survive.
json load_or_new(const fs::path& path) {
  if (!fs::exists(path)) return json{{"schema_version", io::kSchemaVersion}};
  json doc = json::parse(io::read_text(path));
  if (!doc.is_object()) throw ValidationError({path.string() + ": expected a JSON object"});
  return doc;
}

void save(const fs::path& path, const json& doc) { io::write_text(path, doc.dump(2) + "\n"); }

struct RunArgs {
  std::string config, snapshot, out, format = "json";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  unsigned workers = 0;
};

void add_run_args(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config, "scenario config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--snapshot", a.snapshot, "market snapshot JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "master seed (default: config, else " + std::to_string(io::kDefaultSeed) + ")");
  cmd->add_option("--paths", a.paths, "paths per round (default: config)");
  cmd->add_option("--workers", a.workers, "worker threads (0: RISKSIM_THREADS or all cores)");
  cmd->add_option("--format", a.format, "report format")->check(CLI::IsMember({"json", "csv"}));
}

io::ReportFormat format_of(const std::string& f) { return f == "csv" ? io::ReportFormat::csv : io::ReportFormat::json; }

void print_summary(const engine::RiskReport& r) {
  std::printf("fingerprint %s  seed %llu\n", r.fingerprint.c_str(), static_cast<unsigned long long>(r.seed));
  std::printf("VaR95 %s USD over %zu paths (%zu rounds, %s)\n", r.var.var95.to_string().c_str(), r.var.n_samples,
              r.var.rounds.size(), r.var.converged ? "converged" : "not converged");
  for (const auto& c : r.lar.columns) {
    std::printf("  LaR %-6s p50 %s  p95 %s  p99 %s\n", c.name.c_str(), c.p50.to_string().c_str(),
                c.p95.to_string().c_str(), c.p99.to_string().c_str());
  }
}

struct Prepared {
  io::ConfigFile config;
  io::SnapshotFile snapshot;
};

Prepared prepare(const RunArgs& a) {
  Prepared p{io::load_config(a.config), {}};
  p.snapshot = io::load_snapshot(a.snapshot, p.config);
  return p;
}

engine::RiskReport run(const Prepared& p, std::uint64_t seed, const engine::RunOptions& opts) {
  const engine::Scenario sc = io::build_scenario(p.config, p.snapshot, seed);
  engine::RiskReport r = engine::run_scenario(sc, opts);
  r.fingerprint = io::fingerprint(p.config, p.snapshot, seed);
  return r;
}

fs::path set_path(const fs::path& out, std::size_t set) {
  if (set == 0) return out;
  fs::path p = out;
  p.replace_filename(out.stem().string() + "-set" + std::to_string(set + 1) + out.extension().string());
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risksim: Monte Carlo VaR and Liquidations-at-Risk for a Comet-style lending market"};
  app.require_subcommand(1);

  // fit-garch
  std::string prices_csv, asset, out;
  int p = 1, q = 1, arma_p = 0, arma_q = 0;
  auto* fit_garch = app.add_subcommand("fit-garch", "fit an ARMA-GARCH model to a price history");
  fit_garch->add_option("--prices", prices_csv, "CSV with header timestamp,asset,price")->required()->check(CLI::ExistingFile);
  fit_garch->add_option("--asset", asset, "asset symbol")->required();
  fit_garch->add_option("--out", out, "config JSON to create or update")->required();
  fit_garch->add_option("--p", p, "ARCH order")->check(CLI::Range(1, 5));
  fit_garch->add_option("--q", q, "GARCH order")->check(CLI::Range(0, 5));
  fit_garch->add_option("--ar", arma_p, "AR order of the mean")->check(CLI::Range(0, 5));
  fit_garch->add_option("--ma", arma_q, "MA order of the mean")->check(CLI::Range(0, 5));

  // fit-slippage
  std::string samples_json, form = "log";
  bool no_clean = false;
  auto* fit_slip = app.add_subcommand("fit-slippage", "fit a slippage curve to sell/slippage samples");
  fit_slip->add_option("--samples", samples_json, "JSON samples")->required()->check(CLI::ExistingFile);
  fit_slip->add_option("--asset", asset, "asset symbol")->required();
  fit_slip->add_option("--form", form, "curve form")->check(CLI::IsMember({"log", "linear"}));
  fit_slip->add_option("--out", out, "config JSON to create or update")->required();
  fit_slip->add_flag("--no-clean", no_clean, "fit the raw samples without cleaning");

  // simulate
  RunArgs sim_args;
  std::optional<std::size_t> rounds;
  std::size_t sets = 1;
  auto* simulate = app.add_subcommand("simulate", "run a fixed number of rounds and write the report");
  add_run_args(simulate, sim_args);
  simulate->add_option("--out", sim_args.out, "report path (a directory for csv)")->required();
  simulate->add_option("--rounds", rounds, "rounds to run (default: config)")->check(CLI::PositiveNumber);
  simulate->add_option("--sets", sets, "independent simulation sets, seeds seed, seed+1, ...")
      ->check(CLI::PositiveNumber);

  // var
  RunArgs var_args;
  std::string epsilon;
  std::optional<std::size_t> max_rounds;
  auto* var = app.add_subcommand("var", "estimate VaR95 with the staged convergence protocol");
  add_run_args(var, var_args);
  var->add_option("--epsilon", epsilon, "tolerance: USD amount, percent of round-1 p95 (\"1%\") or inf");
  var->add_option("--max-rounds", max_rounds, "round cap (default: config)")->check(CLI::Range(3, 1000));
  var->add_option("--out", var_args.out, "optional report path");

  // report
  std::string report_in, report_format = "csv";
  auto* report = app.add_subcommand("report", "convert a JSON report");
  report->add_option("--in", report_in, "JSON report")->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_format, "output format")->check(CLI::IsMember({"json", "csv"}));
  report->add_option("--out", out, "output path (default: next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kInvalid;
  }

  try {
    if (*fit_garch) {
      const auto prices = io::load_price_series(prices_csv, asset);
      const auto returns = price::log_returns(prices);
      price::GarchSpec spec;
      try {
        spec = price::fit_garch(returns, p, q, arma_p, arma_q);
      } catch (const price::FitError& e) {
        std::cerr << "fit-garch: " << e.what() << "\n";
        return kFailure;
      }
      json doc = load_or_new(out);
      doc["price_model"]["garch"][asset] = {{"mu", spec.mu},         {"ar", spec.ar},       {"ma", spec.ma},
                                            {"alpha0", spec.alpha0}, {"alpha", spec.alpha}, {"beta", spec.beta}};
      save(out, doc);
      std::printf("%s: alpha0 %.6g  persistence %.6f  (%zu returns)\n", asset.c_str(), spec.alpha0,
                  spec.persistence(), returns.size());
      return kOk;
    }

    if (*fit_slip) {
      auto samples = io::load_slippage_samples(samples_json, asset);
      const std::size_t raw = samples.size();
      if (!no_clean) samples = slippage::clean_samples(samples);
      const auto f = form == "linear" ? slippage::Form::linear : slippage::Form::log_linear;
      const auto model = slippage::fit_slippage(samples, f, asset);
      json doc = load_or_new(out);
      doc["slippage"]["models"][asset] = {
          {"form", slippage::to_string(f)}, {"intercept", model.intercept}, {"coefficient", model.coefficient}};
      save(out, doc);
      std::printf("%s: slippage%% = %.6g + %.6g*%s  (%zu of %zu samples)\n", asset.c_str(), model.intercept,
                  model.coefficient, f == slippage::Form::linear ? "sell" : "ln(sell)", samples.size(), raw);
      return kOk;
    }

    if (*simulate) {
      const Prepared prep = prepare(sim_args);
      const auto& sc = prep.config.scenario;
      engine::RunOptions opts;
      opts.var.paths_per_round = sim_args.paths.value_or(sc.paths_per_round);
      opts.var.tolerance = sc.tolerance;
      opts.fixed_rounds = rounds.value_or(sc.rounds);
      opts.lar_bins = sc.lar_bins;
      opts.workers = sim_args.workers;
      const std::uint64_t seed = sim_args.seed.value_or(sc.seed);
      for (std::size_t s = 0; s < sets; ++s) {
        const auto r = run(prep, seed + s, opts);
        const fs::path dest = set_path(sim_args.out, s);
        io::write_report(r, dest, format_of(sim_args.format));
        print_summary(r);
        std::printf("report written to %s\n", dest.string().c_str());
      }
      return kOk;
    }

    if (*var) {
      const Prepared prep = prepare(var_args);
      const auto& sc = prep.config.scenario;
      engine::RunOptions opts;
      opts.var.paths_per_round = var_args.paths.value_or(sc.paths_per_round);
      opts.var.max_rounds = max_rounds.value_or(sc.max_rounds);
      opts.var.tolerance = epsilon.empty() ? sc.tolerance : io::parse_tolerance(epsilon);
      opts.lar_bins = sc.lar_bins;
      opts.workers = var_args.workers;
      const auto r = run(prep, var_args.seed.value_or(sc.seed), opts);
      if (!var_args.out.empty()) io::write_report(r, var_args.out, format_of(var_args.format));
      print_summary(r);
      for (const auto& round : r.var.rounds) {
        std::printf("  round %zu  n=%zu  p95 %s  gap %s%s\n", round.round, round.n_samples,
                    round.percentile.to_string().c_str(), round.gap ? round.gap->to_string().c_str() : "-",
                    round.within_epsilon ? "  within" : "");
      }
      if (!r.var.converged) {
        std::cerr << "var: no convergence after " << r.var.rounds.size() << " rounds (epsilon "
                  << r.var.epsilon << " USD); last estimate " << r.var.var95.to_string() << " USD\n";
        return kNotConverged;
      }
      return kOk;
    }

    if (*report) {
      const auto r = io::read_report(report_in);
      fs::path dest = out;
      if (dest.empty()) {
        dest = fs::path(report_in);
        dest.replace_extension(report_format == "csv" ? "" : ".copy.json");
        if (report_format == "csv") dest += "_csv";
      }
      io::write_report(r, dest, format_of(report_format));
      std::printf("wrote %s\n", dest.string().c_str());
      return kOk;
    }
  } catch (const ValidationError& e) {
    for (const auto& problem : e.problems()) std::cerr << "error: " << problem << "\n";
    return kInvalid;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
