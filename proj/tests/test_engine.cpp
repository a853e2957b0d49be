#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "risksim/engine.hpp"
#include "risksim/errors.hpp"

using namespace risksim;
using namespace risksim::engine;
using fx::prices;
using fx::usd;

namespace {

std::vector<Usd> ints(int lo, int hi) {
  std::vector<Usd> v;
  for (int i = lo; i <= hi; ++i) v.push_back(Usd::from_int(i));
  return v;
}

/// A sampler serving fixed per-round batches.
LossSampler constant_sampler(Usd value) {
  return [value](std::size_t, std::size_t n) { return std::vector<Usd>(n, value); };
}

PathOutcome outcome(std::uint64_t idx, std::vector<Usd> per_asset) {
  PathOutcome o;
  o.path_index = idx;
  o.liquidated_per_asset = per_asset;
  for (const auto& v : per_asset) o.liquidated_total += v;
  return o;
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("nearest-rank percentile") {
    CHECK(percentile(ints(1, 100), 0.95) == Usd::from_int(95));
    CHECK(percentile(std::vector<Usd>{usd("7")}, 0.01) == usd("7"));
    CHECK(percentile(std::vector<Usd>{usd("7")}, 1.0) == usd("7"));
    CHECK(percentile(std::vector<Usd>{Usd{}, Usd{}, Usd{}, usd("10")}, 0.95) == usd("10"));
    CHECK(percentile(ints(1, 20), 0.95) == Usd::from_int(19));  // 0.95·20 = 19 exactly
    CHECK_THROWS_AS(percentile(std::vector<Usd>{}, 0.95), DomainError);
    CHECK_THROWS_AS(percentile(ints(1, 3), 0.0), DomainError);
    CHECK_THROWS_AS(percentile(ints(1, 3), 1.5), DomainError);
  }

  TEST_CASE("flat prices trigger nothing") {
    const Simulator sim(fx::eth_scenario());
    const std::vector<market::PriceVector> path(10, prices({"3000"}));
    const auto o = sim.run_prices(path);
    CHECK(o.protocol_loss == Usd::zero());
    CHECK(o.liquidated_total == Usd::zero());
    CHECK(o.absorb_count == 0);
  }

  TEST_CASE("forced drop reproduces the worked liquidation loss") {
    // Reserve above target: sales stay closed and the lot is marked at the horizon.
    const Simulator sim(fx::eth_scenario("10000", "0"));
    const std::vector<market::PriceVector> path{prices({"2700"}), prices({"2538"})};
    const auto o = sim.run_prices(path);
    CHECK(o.absorb_count == 1);
    CHECK(o.liquidated_total == usd("2700"));
    CHECK(o.protocol_loss == usd("103.14"));
    CHECK(o.final_reserve == usd("10000") - usd("2565"));
  }

  TEST_CASE("an open storefront sells immediately at the absorption price") {
    const Simulator sim(fx::eth_scenario("1000", "1000000"));
    const std::vector<market::PriceVector> path{prices({"2700"}), prices({"2538"})};
    const auto o = sim.run_prices(path);
    CHECK(o.sale_count == 1);
    CHECK(o.protocol_loss == Usd::zero());
    CHECK(o.liquidator_profit == usd("2700") - usd("2619") - usd("8.1") - usd("13.5"));
  }

  TEST_CASE("paths are deterministic and independent of scheduling") {
    const Simulator sim(fx::eth_scenario("1000", "1000000", 9));
    const auto a = sim.run_round(0, 40, 1);
    const auto b = sim.run_round(0, 40, 4);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].path_index == i);
    // shuffled single-path execution matches the pooled round
    std::vector<std::size_t> order(40);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937(1));
    for (std::size_t k : order) CHECK(sim.run_path(k) == a[k]);
  }

  TEST_CASE("rounds number their paths") {
    const Simulator sim(fx::eth_scenario());
    const auto one = sim.run_round(0, 1);
    REQUIRE(one.size() == 1);
    const auto r1 = sim.run_round(1, 5);
    const auto r2 = sim.run_round(2, 5);
    CHECK(r1.front().path_index == 5);
    CHECK(r2.front().path_index == 10);
    CHECK(r1.front().final_prices != r2.front().final_prices);
    CHECK(sim.run_round(1, 5) == r1);
  }

  TEST_CASE("different seeds give different paths") {
    const auto a = run_path(fx::eth_scenario("1000", "1000000", 1), 0);
    const auto b = run_path(fx::eth_scenario("1000", "1000000", 2), 0);
    CHECK(a.final_prices != b.final_prices);
  }

  TEST_CASE("invalid scenarios are rejected") {
    auto sc = fx::eth_scenario();
    sc.horizon_steps = 0;
    sc.garch.clear();
    try {
      sc.validate();
      FAIL("expected validation failure");
    } catch (const ValidationError& e) {
      CHECK(e.problems().size() >= 2);
    }
  }

  TEST_CASE("VaR with zero losses converges at the minimum") {
    const auto r = estimate_var(constant_sampler(Usd{}));
    CHECK(r.var95 == Usd::zero());
    CHECK(r.converged);
    CHECK(r.n_samples == 15000);
    CHECK(r.rounds.size() == 3);
  }

  TEST_CASE("VaR with an infinite tolerance stops at 15000") {
    std::mt19937_64 rng(1);
    LossSampler noisy = [&](std::size_t, std::size_t n) {
      std::vector<Usd> v;
      for (std::size_t i = 0; i < n; ++i) v.push_back(Usd::from_int(std::int64_t(rng() % 100000)));
      return v;
    };
    VarOptions opt;
    opt.tolerance = Tolerance::absolute(std::numeric_limits<double>::infinity());
    const auto r = estimate_var(noisy, opt);
    CHECK(r.converged);
    CHECK(r.n_samples == 15000);
  }

  TEST_CASE("VaR with a zero tolerance never converges") {
    VarOptions opt;
    opt.tolerance = Tolerance::absolute(0.0);
    opt.paths_per_round = 10;
    const auto r = estimate_var(constant_sampler(usd("5")), opt);
    CHECK_FALSE(r.converged);
    CHECK(r.rounds.size() == opt.max_rounds);
    CHECK(r.n_samples == 100);
  }

  TEST_CASE("a failed final check returns to the convergence stage") {
    // pooled p95 by round: 10, 10 (gap 0), 90 (gap 80), 90, 90
    const std::vector<Usd> levels{usd("10"), usd("10"), usd("90"), usd("30"), usd("30"), usd("30")};
    LossSampler s = [&](std::size_t round, std::size_t n) { return std::vector<Usd>(n, levels.at(round)); };
    VarOptions opt;
    opt.paths_per_round = 100;
    opt.tolerance = Tolerance::absolute(1.0);
    const auto r = estimate_var(s, opt);
    REQUIRE(r.rounds.size() >= 3);
    CHECK(r.rounds[1].within_epsilon);
    CHECK_FALSE(r.rounds[2].within_epsilon);
    CHECK(r.converged);
    for (std::size_t k = 1; k < r.rounds.size(); ++k) CHECK(r.rounds[k].n_samples > r.rounds[k - 1].n_samples);
    const std::size_t last = r.rounds.size() - 1;
    CHECK(r.rounds[last].within_epsilon);
    CHECK(r.rounds[last - 1].within_epsilon);
  }

  TEST_CASE("relative tolerance uses the first round") {
    VarOptions opt;
    opt.paths_per_round = 10;
    opt.tolerance = Tolerance::relative(0.01);
    CHECK(estimate_var(constant_sampler(usd("2000")), opt).epsilon == doctest::Approx(20.0));
    CHECK(estimate_var(constant_sampler(Usd{}), opt).epsilon == doctest::Approx(0.01));
  }

  TEST_CASE("LaR with no liquidations") {
    std::vector<PathOutcome> outs;
    for (int i = 0; i < 10; ++i) outs.push_back(outcome(std::uint64_t(i), {Usd{}, Usd{}}));
    const auto lar = estimate_lar(outs, {"ARB", "GMX"});
    REQUIRE(lar.columns.size() == 3);
    for (const auto& c : lar.columns) {
      CHECK(c.p99 == Usd::zero());
      CHECK(c.histogram.counts.size() == 100);
      CHECK(c.histogram.counts[0] == 10);
      CHECK(std::accumulate(c.histogram.counts.begin(), c.histogram.counts.end(), std::uint64_t{0}) == 10);
    }
    CHECK(lar.columns.back().name == "total");
  }

  TEST_CASE("LaR nearest-rank tail") {
    std::vector<PathOutcome> outs;
    for (int i = 0; i < 99; ++i) outs.push_back(outcome(std::uint64_t(i), {Usd{}, usd("5")}));
    outs.push_back(outcome(99, {usd("1000"), usd("5")}));
    const auto lar = estimate_lar(outs, {"ARB", "GMX"});
    // ⌈0.99·100⌉ = 99: the 99th smallest of 100 is still zero
    CHECK(lar.columns[0].p99 == Usd::zero());
    CHECK(lar.columns[0].p95 == Usd::zero());
    CHECK(lar.columns[0].histogram.counts.back() == 1);
    CHECK(lar.columns[2].p50 == usd("5"));
    CHECK(lar.columns[2].histogram.upper == usd("1005"));
  }

  TEST_CASE("LaR p99 picks the single liquidation when it is the 99th rank") {
    std::vector<PathOutcome> outs;
    for (int i = 0; i < 98; ++i) outs.push_back(outcome(std::uint64_t(i), {Usd{}}));
    outs.push_back(outcome(98, {usd("1000")}));
    outs.push_back(outcome(99, {usd("1000")}));
    const auto lar = estimate_lar(outs, {"ARB"});
    CHECK(lar.columns[0].p99 == usd("1000"));
    CHECK(lar.columns[0].p95 == Usd::zero());
  }

  TEST_CASE("LaR percentiles are ordered and total is the sum") {
    const Simulator sim(fx::eth_scenario("1000", "1000000", 4));
    const auto outs = sim.run_round(0, 60);
    for (const auto& o : outs) {
      Usd sum;
      for (const auto& v : o.liquidated_per_asset) sum += v;
      CHECK(o.liquidated_total == sum);
    }
    const auto lar = estimate_lar(outs, {"ETH"}, 10);
    for (const auto& c : lar.columns) {
      CHECK(c.p50 <= c.p90);
      CHECK(c.p90 <= c.p95);
      CHECK(c.p95 <= c.p99);
      CHECK(std::accumulate(c.histogram.counts.begin(), c.histogram.counts.end(), std::uint64_t{0}) == 60);
    }
    CHECK_THROWS_AS(estimate_lar(std::vector<PathOutcome>{}, {"ETH"}), DomainError);
  }

  TEST_CASE("bootstrap standard error") {
    std::mt19937_64 rng(8);
    std::vector<Usd> v;
    for (int i = 0; i < 2000; ++i) v.push_back(Usd::from_int(std::int64_t(rng() % 1000)));
    const double se = bootstrap_se(v, 0.95, 200, 3);
    CHECK(se > 0.0);
    CHECK(se < 50.0);
    CHECK(bootstrap_se(v, 0.95, 200, 3) == se);
    CHECK(bootstrap_se(std::vector<Usd>(100, usd("4")), 0.95, 50) == 0.0);
  }

  TEST_CASE("full run in fixed-round mode") {
    RunOptions opt;
    opt.var.paths_per_round = 20;
    opt.fixed_rounds = 3;
    opt.lar_bins = 10;
    std::vector<PathOutcome> outs;
    const auto r = run_scenario(fx::eth_scenario(), opt, &outs);
    CHECK(r.var.rounds.size() == 3);
    CHECK(r.var.n_samples == 60);
    CHECK(outs.size() == 60);
    CHECK(r.diagnostics.size() == 3);
    CHECK(r.envelope.size() == 1);
    CHECK(r.lar.columns.size() == 2);
    CHECK(run_scenario(fx::eth_scenario(), opt) == r);
  }
}
