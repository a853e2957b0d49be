#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "risksim/agents.hpp"
#include "risksim/market.hpp"
#include "risksim/price_model.hpp"
#include "risksim/slippage.hpp"

// Monte Carlo orchestration: path-local market replicas, rounds of paths,
// the staged VaR convergence protocol and Liquidations-at-Risk tables.
namespace risksim::engine {

struct Scenario {
  std::shared_ptr<const market::MarketParams> params;
  market::MarketState initial_state;  // admitted borrowers, supplier liquidity, reserves
  std::vector<price::GarchSpec> garch;  // per collateral asset
  price::CorrelationMatrix correlation;
  market::PriceVector origin_prices;
  std::vector<slippage::SlippageModel> slippage;  // per collateral asset
  agents::LiquidatorConfig liquidator;
  std::int64_t horizon_steps = 1728;
  std::int64_t step_seconds = 50;
  std::uint64_t master_seed = 0;

  /// Throws ValidationError listing every inconsistency.
  void validate() const;
};

struct PathOutcome {
  std::uint64_t path_index = 0;
  Usd protocol_loss;
  std::vector<Usd> liquidated_per_asset;
  Usd liquidated_total;
  std::uint32_t absorb_count = 0;
  std::uint32_t sale_count = 0;
  Usd bad_debt;
  Usd liquidator_profit;
  Usd final_reserve;
  std::vector<Usd> final_prices;
  std::vector<double> min_price_ratio;  // lowest price / origin over the path
  std::vector<double> max_price_ratio;

  friend bool operator==(const PathOutcome&, const PathOutcome&) = default;
};

/// Worker count: `requested` if positive, else RISKSIM_THREADS, else hardware concurrency.
unsigned resolve_workers(unsigned requested = 0);

class Simulator {
 public:
  explicit Simulator(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }

  /// One horizon on a private market replica; identical for identical (scenario, path_index).
  PathOutcome run_path(std::uint64_t path_index) const;

  /// Same as run_path but with prices given for steps 1..n (step 0 is the scenario origin).
  PathOutcome run_prices(std::span<const market::PriceVector> path, std::uint64_t path_index = 0) const;

  /// Paths round_index·n … round_index·n + n − 1, ordered by path index.
  std::vector<PathOutcome> run_round(std::uint64_t round_index, std::size_t n, unsigned workers = 0) const;

 private:
  struct Prepared;

  Scenario scenario_;
  std::shared_ptr<const Prepared> prepared_;
  price::PathModel model_;
};

PathOutcome run_path(const Scenario& scenario, std::uint64_t path_index);
std::vector<PathOutcome> run_round(const Scenario& scenario, std::uint64_t round_index, std::size_t n = 5000,
                                   unsigned workers = 0);

/// Nearest rank: the ⌈q·n⌉-th smallest sample. Throws DomainError on empty input or q ∉ (0, 1].
Usd percentile(std::vector<Usd> samples, double q);
double percentile(std::vector<double> samples, double q);

/// Standard error of the nearest-rank percentile from `resamples` bootstrap draws.
double bootstrap_se(std::span<const Usd> samples, double q, std::size_t resamples = 500, std::uint64_t seed = 1);

/// Convergence tolerance: absolute USD, or relative to the first round's p95.
struct Tolerance {
  enum class Kind { absolute, relative };
  Kind kind = Kind::relative;
  double value = 0.01;

  static Tolerance absolute(double usd) { return {Kind::absolute, usd}; }
  static Tolerance relative(double fraction) { return {Kind::relative, fraction}; }
};

struct VarOptions {
  std::size_t paths_per_round = 5000;
  std::size_t max_rounds = 10;
  double q = 0.95;
  Tolerance tolerance;
};

struct VarRound {
  std::size_t round = 0;
  std::size_t n_samples = 0;  // pooled
  Usd percentile;
  std::optional<Usd> gap;  // vs. the previous round's pooled percentile
  bool within_epsilon = false;

  friend bool operator==(const VarRound&, const VarRound&) = default;
};

struct VarReport {
  Usd var95;
  bool converged = false;
  double epsilon = 0.0;
  std::size_t n_samples = 0;
  std::vector<VarRound> rounds;

  friend bool operator==(const VarReport&, const VarReport&) = default;
};

/// Losses for paths round·n … round·n + n − 1.
using LossSampler = std::function<std::vector<Usd>(std::size_t round, std::size_t n)>;

/// First round sets the baseline; each further round pools n more paths. Two consecutive
/// in-tolerance gaps (the convergence check, then the final round) conclude the estimate.
/// A failed final check returns to the convergence stage. Stops at max_rounds.
VarReport estimate_var(const LossSampler& sampler, const VarOptions& options = {});

struct Histogram {
  Usd upper;  // bins span [0, upper]
  std::vector<std::uint64_t> counts;

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

struct LarColumn {
  std::string name;
  Usd p50, p90, p95, p99;
  Histogram histogram;

  friend bool operator==(const LarColumn&, const LarColumn&) = default;
};

struct LarReport {
  std::vector<LarColumn> columns;  // one per asset, then "total"

  friend bool operator==(const LarReport&, const LarReport&) = default;
};

Histogram make_histogram(std::span<const Usd> samples, std::size_t bins = 100);

/// Percentile tables and histograms of liquidated value per asset and in total.
LarReport estimate_lar(std::span<const PathOutcome> outcomes, const std::vector<std::string>& asset_names,
                       std::size_t bins = 100);

struct RoundDiagnostics {
  std::size_t round = 0;
  std::size_t paths = 0;
  Usd mean_loss;
  Usd max_loss;
  std::uint64_t absorbs = 0;
  std::uint64_t sales = 0;
  std::uint64_t paths_with_loss = 0;
  Usd bad_debt;

  friend bool operator==(const RoundDiagnostics&, const RoundDiagnostics&) = default;
};

/// Largest one-day drop and rise of each asset across all paths, in percent of the origin price.
struct PriceEnvelope {
  std::string asset;
  double max_drop_pct = 0.0;
  double max_rise_pct = 0.0;

  friend bool operator==(const PriceEnvelope&, const PriceEnvelope&) = default;
};

struct RiskReport {
  std::uint64_t seed = 0;
  std::string fingerprint;
  VarReport var;
  LarReport lar;
  std::vector<RoundDiagnostics> diagnostics;
  std::vector<PriceEnvelope> envelope;

  friend bool operator==(const RiskReport&, const RiskReport&) = default;
};

struct RunOptions {
  VarOptions var;
  /// Run exactly this many rounds without the convergence protocol (0 = use the protocol).
  std::size_t fixed_rounds = 0;
  std::size_t lar_bins = 100;
  unsigned workers = 0;
};

/// Full pipeline over a scenario. Outcomes are optionally returned through `outcomes`.
RiskReport run_scenario(const Scenario& scenario, const RunOptions& options,
                        std::vector<PathOutcome>* outcomes = nullptr);

}  // namespace risksim::engine
