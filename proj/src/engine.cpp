#include "risksim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "risksim/errors.hpp"
#include "risksim/rng.hpp"

namespace risksim::engine {

using market::MarketState;
using market::PriceVector;

void Scenario::validate() const {
  std::vector<std::string> problems;
  if (!params) throw ValidationError({"scenario has no market parameters"});
  try {
    params->validate();
  } catch (const ValidationError& e) {
    problems = e.problems();
  }
  const std::size_t n = params->asset_count();
  if (garch.size() != n) problems.push_back("one GARCH spec per collateral asset is required");
  for (std::size_t i = 0; i < garch.size(); ++i) {
    try {
      garch[i].validate();
    } catch (const ValidationError& e) {
      for (const auto& p : e.problems()) problems.push_back("GARCH spec #" + std::to_string(i) + ": " + p);
    }
  }
  if (correlation.size() != n) problems.push_back("correlation matrix size does not match the asset count");
  if (origin_prices.usd.size() != n) problems.push_back("origin prices do not match the asset count");
  for (const auto& p : origin_prices.usd)
    if (p <= Usd::zero()) problems.push_back("origin prices must be positive");
  if (slippage.size() != n) problems.push_back("one slippage model per collateral asset is required");
  if (horizon_steps < 1) problems.push_back("horizon_steps must be >= 1");
  if (step_seconds < 1) problems.push_back("step_seconds must be >= 1");
  if (liquidator.trading_fee < Ratio::zero() || liquidator.trading_fee >= Ratio::one())
    problems.push_back("trading fee must be in [0, 1)");
  if (initial_state.shared_params() != params) problems.push_back("initial market state uses different parameters");
  for (const auto& a : initial_state.accounts) {
    if (a.collateral.size() != n) problems.push_back("account '" + a.id + "' collateral does not match the assets");
    if (a.base_borrowed < Usd::zero() || a.base_supplied < Usd::zero())
      problems.push_back("account '" + a.id + "' has negative balances");
  }
  if (initial_state.total_base_borrowed > initial_state.total_base_supplied + initial_state.base_reserve)
    problems.push_back("total borrowed exceeds supplied liquidity plus reserves");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RISKSIM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return unsigned(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Double-precision shadows of the account book for a cheap health pre-screen.
struct Simulator::Prepared {
  std::size_t assets = 0;
  std::vector<double> weighted_qty;  // account-major: whole tokens × lcf
  std::vector<double> principal;
};

namespace {

std::vector<double> to_doubles(const PriceVector& p) {
  std::vector<double> out;
  for (const auto& v : p.usd) out.push_back(v.to_double());
  return out;
}

class PathRun {
 public:
  PathRun(const Scenario& sc, const std::vector<double>& weighted_qty, const std::vector<double>& principal,
          std::uint64_t path_index)
      : sc_(sc), weighted_qty_(weighted_qty), principal_(principal), state_(sc.initial_state) {
    const std::size_t n = sc.params->asset_count();
    out_.path_index = path_index;
    out_.liquidated_per_asset.assign(n, Usd{});
    out_.min_price_ratio.assign(n, 1.0);
    out_.max_price_ratio.assign(n, 1.0);
    live_.resize(state_.accounts.size());
    for (std::size_t a = 0; a < live_.size(); ++a) live_[a] = state_.accounts[a].base_borrowed > Usd::zero();
    origin_ = to_doubles(sc.origin_prices);
    prices_d_.resize(n);
  }

  void step(const PriceVector& prices, std::int64_t step) {
    const std::size_t n = prices.usd.size();
    for (std::size_t i = 0; i < n; ++i) {
      prices_d_[i] = prices.usd[i].to_double();
      const double ratio = prices_d_[i] / origin_[i];
      out_.min_price_ratio[i] = std::min(out_.min_price_ratio[i], ratio);
      out_.max_price_ratio[i] = std::max(out_.max_price_ratio[i], ratio);
    }
    market::accrue(state_, sc_.step_seconds);
    scan(prices, step);
    liquidate(prices, step);
  }

  PathOutcome finish(const PriceVector& last, std::int64_t step) {
    out_.protocol_loss = market::settle_horizon(state_, last, step);
    out_.final_prices = last.usd;
    out_.final_reserve = state_.base_reserve;
    for (const auto& l : out_.liquidated_per_asset) out_.liquidated_total += l;
    return std::move(out_);
  }

 private:
  void scan(const PriceVector& prices, std::int64_t step) {
    const std::size_t n = prices_d_.size();
    const double index = state_.borrow_index.to_double();
    for (std::size_t a = 0; a < live_.size(); ++a) {
      if (!live_[a]) continue;
      const double* w = weighted_qty_.data() + a * n;
      double limit = 0.0;
      for (std::size_t i = 0; i < n; ++i) limit += w[i] * prices_d_[i];
      const double debt = principal_[a] * index;
      // Exact fixed-point check only near the boundary; the margin dwarfs double rounding.
      if (limit > debt * (1.0 + 1e-12) + 1e-6) continue;
      if (!market::is_liquidatable(state_, a, prices)) continue;
      const auto ev = market::absorb_index(state_, a, prices, step);
      live_[a] = false;
      ++out_.absorb_count;
      out_.bad_debt += ev.bad_debt_usd;
      for (std::size_t i = 0; i < n; ++i) out_.liquidated_per_asset[i] += ev.value_per_asset[i];
    }
  }

  void liquidate(const PriceVector& prices, std::int64_t step) {
    for (std::size_t i = 0; i < state_.for_sale.size(); ++i) {
      if (state_.for_sale[i].units == 0) continue;
      if (auto r = agents::execute_liquidation(state_, i, prices, sc_.slippage[i], sc_.liquidator, step)) {
        ++out_.sale_count;
        out_.liquidator_profit += r->profit;
      }
    }
  }

  const Scenario& sc_;
  const std::vector<double>& weighted_qty_;
  const std::vector<double>& principal_;
  MarketState state_;
  PathOutcome out_;
  std::vector<char> live_;
  std::vector<double> origin_;
  std::vector<double> prices_d_;
};

price::PathModel make_model(const Scenario& sc) {
  sc.validate();
  return price::PathModel(sc.garch, sc.correlation, to_doubles(sc.origin_prices), sc.master_seed);
}

Usd abs_diff(Usd a, Usd b) { return a > b ? a - b : b - a; }

std::size_t nearest_rank(std::size_t n, double q) {
  if (n == 0) throw DomainError("percentile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("percentile rank must be in (0, 1]");
  const int128 scale = Ratio::kScale;
  const int128 rank = (Ratio::from_double(q).raw() * int128(n) + scale - 1) / scale;
  return std::size_t(std::clamp<int128>(rank, 1, int128(n)));
}

}  // namespace

Simulator::Simulator(Scenario scenario) : scenario_(std::move(scenario)), model_(make_model(scenario_)) {
  auto prep = std::make_shared<Prepared>();
  const auto& params = *scenario_.params;
  prep->assets = params.asset_count();
  for (const auto& a : scenario_.initial_state.accounts) {
    for (std::size_t i = 0; i < prep->assets; ++i) {
      const auto& cfg = params.collaterals[i];
      prep->weighted_qty.push_back(a.collateral[i].to_double(cfg.asset.decimals) * cfg.lcf.to_double());
    }
    prep->principal.push_back(a.base_borrowed.to_double());
  }
  prepared_ = std::move(prep);
}

PathOutcome Simulator::run_path(std::uint64_t path_index) const {
  PathRun run(scenario_, prepared_->weighted_qty, prepared_->principal, path_index);
  auto cursor = model_.cursor(path_index);
  std::vector<double> raw(prepared_->assets);
  PriceVector prices{std::vector<Usd>(prepared_->assets)};
  for (std::int64_t s = 1; s <= scenario_.horizon_steps; ++s) {
    cursor.advance(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      prices.usd[i] = std::max(Usd::from_raw(1), Usd::from_double_fast(raw[i]));
    }
    run.step(prices, s);
  }
  return run.finish(prices, scenario_.horizon_steps);
}

PathOutcome Simulator::run_prices(std::span<const PriceVector> path, std::uint64_t path_index) const {
  if (path.empty()) throw DomainError("price path needs at least one step");
  PathRun run(scenario_, prepared_->weighted_qty, prepared_->principal, path_index);
  for (std::size_t s = 0; s < path.size(); ++s) {
    if (path[s].usd.size() != prepared_->assets) throw DomainError("price vector size mismatch");
    run.step(path[s], std::int64_t(s + 1));
  }
  return run.finish(path.back(), std::int64_t(path.size()));
}

std::vector<PathOutcome> Simulator::run_round(std::uint64_t round_index, std::size_t n, unsigned workers) const {
  if (n < 1) throw DomainError("a round needs at least one path");
  std::vector<PathOutcome> out(n);
  const std::uint64_t first = round_index * n;
  const unsigned threads = std::min<unsigned>(resolve_workers(workers), unsigned(n));
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 8;
  auto work = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      for (std::size_t k = begin; k < std::min(n, begin + kChunk); ++k) out[k] = run_path(first + k);
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  return out;
}

PathOutcome run_path(const Scenario& scenario, std::uint64_t path_index) {
  return Simulator(scenario).run_path(path_index);
}

std::vector<PathOutcome> run_round(const Scenario& scenario, std::uint64_t round_index, std::size_t n,
                                   unsigned workers) {
  return Simulator(scenario).run_round(round_index, n, workers);
}

Usd percentile(std::vector<Usd> samples, double q) {
  const std::size_t rank = nearest_rank(samples.size(), q);
  std::nth_element(samples.begin(), samples.begin() + std::ptrdiff_t(rank - 1), samples.end());
  return samples[rank - 1];
}

double percentile(std::vector<double> samples, double q) {
  const std::size_t rank = nearest_rank(samples.size(), q);
  std::nth_element(samples.begin(), samples.begin() + std::ptrdiff_t(rank - 1), samples.end());
  return samples[rank - 1];
}

double bootstrap_se(std::span<const Usd> samples, double q, std::size_t resamples, std::uint64_t seed) {
  if (samples.empty()) throw DomainError("bootstrap of an empty sample");
  const NormalStream rng(seed, 0xB007u);
  std::vector<double> estimates;
  std::vector<double> draw(samples.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto pick = std::size_t(rng.uniform(b, std::uint32_t(k)) * double(samples.size()));
      draw[k] = samples[std::min(pick, samples.size() - 1)].to_double();
    }
    estimates.push_back(percentile(draw, q));
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= double(estimates.size());
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  return std::sqrt(ss / double(estimates.size() - 1));
}

VarReport estimate_var(const LossSampler& sampler, const VarOptions& options) {
  if (options.paths_per_round < 1) throw DomainError("paths_per_round must be >= 1");
  if (options.tolerance.kind == Tolerance::Kind::relative && !(options.tolerance.value > 0.0))
    throw DomainError("relative tolerance must be > 0");

  VarReport report;
  std::vector<Usd> pool = sampler(0, options.paths_per_round);
  Usd previous = percentile(pool, options.q);
  report.rounds.push_back({0, pool.size(), previous, std::nullopt, false});

  if (options.tolerance.kind == Tolerance::Kind::relative) {
    report.epsilon = previous > Usd::zero() ? previous.to_double() * options.tolerance.value : 0.01;
  } else {
    report.epsilon = options.tolerance.value;
  }

  bool final_stage = false;
  for (std::size_t r = 1; r < options.max_rounds; ++r) {
    auto more = sampler(r, options.paths_per_round);
    pool.insert(pool.end(), more.begin(), more.end());
    const Usd current = percentile(pool, options.q);
    const Usd gap = abs_diff(current, previous);
    const bool within = report.epsilon > 0.0 && gap.to_double() <= report.epsilon;
    report.rounds.push_back({r, pool.size(), current, gap, within});
    previous = current;
    if (!within) {
      final_stage = false;
    } else if (!final_stage) {
      final_stage = true;
    } else {
      report.converged = true;
      break;
    }
  }
  report.var95 = previous;
  report.n_samples = pool.size();
  return report;
}

Histogram make_histogram(std::span<const Usd> samples, std::size_t bins) {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  for (const auto& s : samples) h.upper = std::max(h.upper, s);
  for (const auto& s : samples) {
    std::size_t bin = 0;
    if (h.upper > Usd::zero()) {
      bin = std::size_t(std::max<int128>(0, s.raw()) * int128(bins) / h.upper.raw());
      bin = std::min(bin, bins - 1);
    }
    ++h.counts[bin];
  }
  return h;
}

LarReport estimate_lar(std::span<const PathOutcome> outcomes, const std::vector<std::string>& asset_names,
                       std::size_t bins) {
  if (outcomes.empty()) throw DomainError("LaR needs at least one path outcome");
  LarReport report;
  auto column = [&](std::string name, std::vector<Usd> values) {
    LarColumn c;
    c.name = std::move(name);
    c.histogram = make_histogram(values, bins);
    c.p50 = percentile(values, 0.50);
    c.p90 = percentile(values, 0.90);
    c.p95 = percentile(values, 0.95);
    c.p99 = percentile(values, 0.99);
    report.columns.push_back(std::move(c));
  };
  for (std::size_t i = 0; i < asset_names.size(); ++i) {
    std::vector<Usd> values;
    values.reserve(outcomes.size());
    for (const auto& o : outcomes) values.push_back(o.liquidated_per_asset.at(i));
    column(asset_names[i], std::move(values));
  }
  std::vector<Usd> totals;
  totals.reserve(outcomes.size());
  for (const auto& o : outcomes) totals.push_back(o.liquidated_total);
  column("total", std::move(totals));
  return report;
}

namespace {

RoundDiagnostics diagnose(std::size_t round, std::span<const PathOutcome> outcomes) {
  RoundDiagnostics d;
  d.round = round;
  d.paths = outcomes.size();
  Usd total;
  for (const auto& o : outcomes) {
    total += o.protocol_loss;
    d.max_loss = std::max(d.max_loss, o.protocol_loss);
    d.absorbs += o.absorb_count;
    d.sales += o.sale_count;
    d.paths_with_loss += o.protocol_loss > Usd::zero() ? 1 : 0;
    d.bad_debt += o.bad_debt;
  }
  if (!outcomes.empty()) d.mean_loss = Usd::from_raw(detail::div_half_even(total.raw(), int128(outcomes.size())));
  return d;
}

}  // namespace

RiskReport run_scenario(const Scenario& scenario, const RunOptions& options, std::vector<PathOutcome>* outcomes) {
  const Simulator sim(scenario);
  std::vector<PathOutcome> all;
  RiskReport report;
  report.seed = scenario.master_seed;

  LossSampler sampler = [&](std::size_t round, std::size_t n) {
    auto batch = sim.run_round(round, n, options.workers);
    report.diagnostics.push_back(diagnose(round, batch));
    std::vector<Usd> losses;
    losses.reserve(batch.size());
    for (const auto& o : batch) losses.push_back(o.protocol_loss);
    all.insert(all.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
    return losses;
  };

  if (options.fixed_rounds > 0) {
    // A fixed budget: every round is pooled and checked, nothing stops early.
    VarOptions fixed = options.var;
    fixed.max_rounds = 1;
    VarReport var = estimate_var(sampler, fixed);
    std::vector<Usd> pool;
    for (const auto& o : all) pool.push_back(o.protocol_loss);
    for (std::size_t r = 1; r < options.fixed_rounds; ++r) {
      auto more = sampler(r, options.var.paths_per_round);
      pool.insert(pool.end(), more.begin(), more.end());
      const Usd p = percentile(pool, options.var.q);
      const Usd gap = abs_diff(p, var.rounds.back().percentile);
      var.rounds.push_back({r, pool.size(), p, gap, var.epsilon > 0.0 && gap.to_double() <= var.epsilon});
      var.var95 = p;
      var.n_samples = pool.size();
    }
    const std::size_t k = var.rounds.size();
    var.converged = k >= 3 && var.rounds[k - 1].within_epsilon && var.rounds[k - 2].within_epsilon;
    report.var = std::move(var);
  } else {
    report.var = estimate_var(sampler, options.var);
  }

  std::vector<std::string> names;
  for (const auto& c : scenario.params->collaterals) names.push_back(c.asset.symbol);
  report.lar = estimate_lar(all, names, options.lar_bins);

  for (std::size_t i = 0; i < names.size(); ++i) {
    PriceEnvelope e{names[i], 0.0, 0.0};
    for (const auto& o : all) {
      e.max_drop_pct = std::max(e.max_drop_pct, (1.0 - o.min_price_ratio[i]) * 100.0);
      e.max_rise_pct = std::max(e.max_rise_pct, (o.max_price_ratio[i] - 1.0) * 100.0);
    }
    report.envelope.push_back(e);
  }
  if (outcomes) *outcomes = std::move(all);
  return report;
}

}  // namespace risksim::engine
