#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "risksim/errors.hpp"

using namespace risksim;
using namespace risksim::market;
using fx::prices;
using fx::ratio;
using fx::usd;

namespace {

MarketParams two_asset(const char* lcf_a, const char* lcf_b, const char* lf_a = "0.9", const char* lf_b = "0.95") {
  MarketParams p;
  p.sfp = ratio("0.6");
  p.target_reserve = usd("1000000");
  p.supply_ir = {Ratio{}, Ratio{}, Ratio{}, ratio("0.5")};
  p.borrow_ir = p.supply_ir;
  p.collaterals = {fx::collateral("WBTC", 8, "0.7", lcf_a, lf_a), fx::collateral("ETH", 18, "0.75", lcf_b, lf_b)};
  return p;
}

Account eth_account(const MarketParams& p, const char* eth, const char* debt) {
  return make_account(p, "a", {{"ETH", TokenAmount::parse(eth, 18)}}, usd(debt));
}

}  // namespace

TEST_SUITE("market") {
  TEST_CASE("borrowing capacity") {
    auto p = *fx::eth_market();
    p.collaterals[0].bcf = ratio("0.75");
    p.collaterals[0].lcf = ratio("0.8");
    CHECK(borrowing_capacity(eth_account(p, "3", "0"), prices({"3000"}), p) == usd("6750"));
    CHECK(borrowing_capacity(make_account(p, "e", {}, Usd{}), prices({"3000"}), p) == Usd::zero());

    const auto two = two_asset("0.8", "0.8");
    const auto acct = make_account(two, "x",
                                   {{"WBTC", TokenAmount::parse("1", 8)}, {"ETH", TokenAmount::parse("2", 18)}}, Usd{});
    CHECK(borrowing_capacity(acct, prices({"60000", "3000"}), two) == usd("46500"));
  }

  TEST_CASE("unknown collateral symbol is a configuration error") {
    const auto p = *fx::eth_market();
    CHECK_THROWS_AS(make_account(p, "x", {{"DOGE", TokenAmount{1}}}, Usd{}), ConfigError);
    CHECK_THROWS_AS(p.index_of("DOGE"), ConfigError);
  }

  TEST_CASE("liquidation limit") {
    const auto p = *fx::eth_market("0.6", "0.92");
    CHECK(liquidation_limit(eth_account(p, "1", "2400"), prices({"2700"}), p) == usd("2484"));
    CHECK(liquidation_limit(make_account(p, "e", {}, usd("1")), prices({"2700"}), p) == Usd::zero());

    const auto two = two_asset("0.9", "0.8");
    // $1000 of WBTC and $500 of ETH
    const auto acct = make_account(
        two, "x", {{"WBTC", TokenAmount::parse("0.02", 8)}, {"ETH", TokenAmount::parse("0.25", 18)}}, Usd{});
    CHECK(liquidation_limit(acct, prices({"50000", "2000"}), two) == usd("1300"));
  }

  TEST_CASE("strict liquidation predicate") {
    const auto p = *fx::eth_market("0.6", "0.92");
    CHECK_FALSE(is_liquidatable(eth_account(p, "1", "2400"), prices({"2700"}), p));  // limit 2484
    CHECK_FALSE(is_liquidatable(eth_account(p, "1", "0"), prices({"1"}), p));
    CHECK(is_liquidatable(eth_account(p, "1", "2400"), prices({"2500"}), p));  // limit 2300
    // exactly at the limit: not liquidatable; one cent over: liquidatable
    CHECK_FALSE(is_liquidatable(eth_account(p, "1", "2484"), prices({"2700"}), p));
    CHECK(is_liquidatable(eth_account(p, "1", "2484.00000001"), prices({"2700"}), p));
  }

  TEST_CASE("health factor") {
    const auto p = *fx::eth_market("0.6", "0.92");
    CHECK(health_factor(eth_account(p, "1", "2400"), prices({"2700"}), p) == ratio("1.035"));
    CHECK(health_factor(eth_account(p, "1", "0"), prices({"2700"}), p) == kInfiniteHealth);
    auto q = p;
    q.collaterals[0].lcf = ratio("0.8");
    CHECK(health_factor(eth_account(q, "1", "2000"), prices({"5000"}), q) == ratio("2"));
  }

  TEST_CASE("utilization") {
    MarketState s(fx::eth_market());
    s.total_base_borrowed = usd("50");
    s.total_base_supplied = usd("100");
    CHECK(utilization(s) == ratio("0.5"));
    s.total_base_supplied = Usd{};
    CHECK(utilization(s) == Ratio{});
    s.total_base_borrowed = usd("100");
    s.total_base_supplied = usd("100");
    CHECK(utilization(s) == Ratio::one());
    s.total_base_borrowed = usd("150");
    CHECK(utilization(s) == Ratio::one());  // clamped
  }

  TEST_CASE("rate curves") {
    const IRParams ir{ratio("0.000000001"), ratio("0.04"), ratio("0.4"), ratio("0.8")};
    CHECK(supply_rate(Ratio{}, ir) == ir.base);
    CHECK(borrow_rate(Ratio{}, ir) == ir.base);
    const Ratio at_kink = ir.base + ir.slope_low * ir.kink;
    CHECK(supply_rate(ir.kink, ir) == at_kink);
    CHECK(borrow_rate(ir.kink, ir) == at_kink);

    const IRParams zero_base{Ratio{}, ratio("0.04"), ratio("0.4"), ratio("0.8")};
    // 0.04·0.8 + 0.4·0.1
    CHECK(supply_rate(ratio("0.9"), zero_base) == ratio("0.072"));
    CHECK(borrow_rate(ratio("0.9"), zero_base) == ratio("0.072"));
    CHECK(supply_rate(ratio("0.5"), zero_base) == ratio("0.02"));

    CHECK_THROWS_AS(supply_rate(ratio("1.01"), ir), DomainError);
    CHECK_THROWS_AS(borrow_rate(ratio("-0.01"), ir), DomainError);
  }

  TEST_CASE("accrue") {
    auto p = std::make_shared<MarketParams>(*fx::eth_market());
    p->borrow_ir.base = ratio("0.000000001");
    MarketState s(p);
    s.total_base_borrowed = usd("1000");
    s.total_base_supplied = usd("2000");
    s.base_reserve = usd("10");

    MarketState same = s;
    accrue(same, 0);
    CHECK(same.total_base_borrowed == s.total_base_borrowed);
    CHECK(same.base_reserve == s.base_reserve);

    accrue(s, 86400);
    CHECK(s.total_base_borrowed == usd("1000.0864"));
    CHECK(s.total_base_supplied == usd("2000"));
    CHECK(s.base_reserve == usd("10.0864"));
    CHECK(s.borrow_index == ratio("1.0000864"));

    MarketState idle(fx::eth_market());
    idle.total_base_borrowed = usd("1000");
    idle.total_base_supplied = usd("2000");
    accrue(idle, 86400);
    CHECK(idle.total_base_borrowed == usd("1000"));
    CHECK_THROWS_AS(accrue(idle, -1), DomainError);
  }

  TEST_CASE("absorb pays LF share of value and credits the excess") {
    auto s = fx::eth_state(fx::eth_market(), "1000");
    const Usd reserve0 = s.base_reserve;
    const auto ev = absorb(s, "alice", prices({"2700"}), 1);
    CHECK(ev.payment_usd == usd("2565"));
    CHECK(ev.borrower_credit == usd("165"));
    CHECK(ev.collateral_value_usd == usd("2700"));
    CHECK(ev.bad_debt_usd == Usd::zero());
    // conservation
    const auto& a = s.accounts[0];
    CHECK(a.base_borrowed == Usd::zero());
    CHECK(a.base_supplied == usd("165"));
    CHECK(a.collateral[0].units == 0);
    CHECK(s.for_sale[0] == TokenAmount::parse("1", 18));
    CHECK(s.base_reserve == reserve0 - usd("2400") - usd("165"));
    CHECK(s.total_base_borrowed == Usd::zero());
    CHECK(s.absorbed_book.size() == 1);
  }

  TEST_CASE("absorb refusals") {
    auto s = fx::eth_state(fx::eth_market(), "1000");
    CHECK_THROWS_AS(absorb(s, "alice", prices({"3000"}), 1), RejectedError);
    CHECK_THROWS_AS(absorb(s, "bob", prices({"2000"}), 1), NotFoundError);
  }

  TEST_CASE("absorb with worthless collateral writes the debt off") {
    auto params = fx::eth_market();
    MarketState s(params);
    s.total_base_supplied = usd("1000");
    s.total_base_borrowed = usd("100");
    s.add_account(make_account(*params, "bare", {}, usd("100")));
    const auto ev = absorb(s, "bare", prices({"2700"}), 1);
    CHECK(ev.payment_usd == Usd::zero());
    CHECK(ev.bad_debt_usd == usd("100"));
    CHECK(ev.borrower_credit == Usd::zero());
  }

  TEST_CASE("absorb over two collaterals") {
    auto p = std::make_shared<MarketParams>(two_asset("0.8", "0.8"));
    MarketState s(p);
    s.total_base_supplied = usd("100000");
    s.total_base_borrowed = usd("1300");
    s.add_account(make_account(
        *p, "x", {{"WBTC", TokenAmount::parse("0.02", 8)}, {"ETH", TokenAmount::parse("0.25", 18)}}, usd("1300")));
    const auto ev = absorb(s, "x", prices({"50000", "2000"}), 1);
    CHECK(ev.payment_usd == usd("1375"));
    CHECK(ev.borrower_credit == usd("75"));
    CHECK(s.for_sale[0] == TokenAmount::parse("0.02", 8));
    CHECK(s.for_sale[1] == TokenAmount::parse("0.25", 18));
  }

  TEST_CASE("storefront quote") {
    auto s = fx::eth_state(fx::eth_market(), "1000");
    absorb(s, "alice", prices({"2700"}), 1);
    const auto one = TokenAmount::parse("1", 18);
    CHECK(quote_collateral(s, 0, one, prices({"2700"})) == usd("2619"));
    CHECK(quote_collateral(s, 0, one, prices({"2538"})) == usd("2461.86"));
    CHECK_THROWS_AS(quote_collateral(s, 0, TokenAmount::parse("2", 18), prices({"2700"})), RejectedError);

    auto no_penalty = std::make_shared<MarketParams>(*fx::eth_market());
    no_penalty->collaterals[0].lf = Ratio::one();
    no_penalty->collaterals[0].lcf = ratio("0.88");
    auto t = fx::eth_state(no_penalty, "1000");
    absorb(t, "alice", prices({"2700"}), 1);
    CHECK(quote_collateral(t, 0, one, prices({"2700"})) == usd("2700"));
  }

  TEST_CASE("sale after a further drop books the decay loss") {
    auto s = fx::eth_state(fx::eth_market(), "1000");
    absorb(s, "alice", prices({"2700"}), 1);
    const Usd reserve = s.base_reserve;
    const auto sale = buy_collateral(s, 0, TokenAmount::parse("1", 18), prices({"2538"}), 2);
    CHECK(sale.proceeds == usd("2461.86"));
    CHECK(sale.payment_attributed == usd("2565"));
    CHECK(sale.loss_usd == usd("103.14"));
    CHECK(s.base_reserve == reserve + usd("2461.86"));
    CHECK(s.for_sale[0].units == 0);
    CHECK(total_loss(s) == usd("103.14"));
  }

  TEST_CASE("sale at the absorption price has no loss") {
    auto s = fx::eth_state(fx::eth_market(), "1000");
    absorb(s, "alice", prices({"2700"}), 1);
    const auto sale = buy_collateral(s, 0, TokenAmount::parse("1", 18), prices({"2700"}), 1);
    CHECK(sale.proceeds == usd("2619"));
    CHECK(sale.loss_usd == Usd::zero());
  }

  TEST_CASE("partial sales attribute payment pro rata") {
    auto s = fx::eth_state(fx::eth_market(), "1000");
    absorb(s, "alice", prices({"2700"}), 1);
    const auto half = TokenAmount::parse("0.5", 18);
    const auto first = buy_collateral(s, 0, half, prices({"2538"}), 2);
    CHECK(first.payment_attributed == usd("1282.5"));
    CHECK(first.loss_usd == usd("51.57"));
    const auto second = buy_collateral(s, 0, half, prices({"2538"}), 3);
    CHECK(second.loss_usd == usd("51.57"));
    CHECK(total_loss(s) == usd("103.14"));
    CHECK(s.lots.empty());
  }

  TEST_CASE("sales are closed at or above target reserve") {
    auto s = fx::eth_state(fx::eth_market("0.6", "0.88", "0"), "10000");
    absorb(s, "alice", prices({"2700"}), 1);
    REQUIRE(s.base_reserve >= s.params().target_reserve);
    const auto before = s.for_sale;
    CHECK_THROWS_AS(buy_collateral(s, 0, TokenAmount::parse("1", 18), prices({"2700"}), 1), RejectedError);
    CHECK(s.for_sale == before);
  }

  TEST_CASE("settle at horizon") {
    SUBCASE("empty inventory returns the ledger") {
      auto s = fx::eth_state(fx::eth_market(), "1000");
      absorb(s, "alice", prices({"2700"}), 1);
      buy_collateral(s, 0, TokenAmount::parse("1", 18), prices({"2538"}), 2);
      CHECK(settle_horizon(s, prices({"1000"}), 3) == usd("103.14"));
    }
    SUBCASE("quote above payment adds nothing") {
      auto s = fx::eth_state(fx::eth_market(), "1000");
      absorb(s, "alice", prices({"2700"}), 1);
      CHECK(settle_horizon(s, prices({"2700"}), 3) == Usd::zero());
      CHECK(s.loss_ledger.size() == 1);
      CHECK(s.loss_ledger[0].cause == LossCause::unsold_at_horizon);
    }
    SUBCASE("quote below payment adds the shortfall") {
      // sfp 0: the storefront quote equals market value, so $2400 quotes $2400
      auto s = fx::eth_state(fx::eth_market("0"), "1000");
      absorb(s, "alice", prices({"2700"}), 1);
      CHECK(settle_horizon(s, prices({"2400"}), 3) == usd("165"));
      // idempotent
      CHECK(settle_horizon(s, prices({"1"}), 4) == usd("165"));
    }
  }

  TEST_CASE("supply caps") {
    auto p = std::make_shared<MarketParams>(*fx::eth_market());
    p->collaterals[0].supply_cap = TokenAmount::parse("1.5", 18);
    MarketState s(p);
    s.add_account(make_account(*p, "a", {{"ETH", TokenAmount::parse("1", 18)}}, Usd{}));
    CHECK_THROWS_AS(s.add_account(make_account(*p, "b", {{"ETH", TokenAmount::parse("1", 18)}}, Usd{})),
                    RejectedError);
    supply_collateral(s, 0, 0, TokenAmount::parse("0.5", 18));
    CHECK_THROWS_AS(supply_collateral(s, 0, 0, TokenAmount{1}), RejectedError);
    CHECK(s.posted_collateral[0] == TokenAmount::parse("1.5", 18));
  }

  TEST_CASE("parameter validation collects every problem") {
    MarketParams p = *fx::eth_market();
    p.collaterals[0].bcf = ratio("0.95");  // above lcf
    p.sfp = ratio("1.5");
    p.collaterals.push_back(p.collaterals[0]);  // duplicate symbol
    try {
      p.validate();
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.problems().size() >= 3);
    }
  }

  TEST_CASE("property: storefront quote never exceeds market value") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pct(0, 100);
    for (int i = 0; i < 200; ++i) {
      auto p = std::make_shared<MarketParams>(*fx::eth_market());
      p->sfp = Ratio::from_raw(Ratio::kScale * pct(rng) / 100);
      p->collaterals[0].lf = Ratio::from_raw(Ratio::kScale * std::max(1, pct(rng)) / 100);
      p->collaterals[0].lcf = ratio("0.88");
      MarketState s(p);
      s.for_sale[0] = TokenAmount::parse("3", 18);
      const auto qty = TokenAmount{int128(rng() % 3000000000000000000ull) + 1};
      const auto px = prices({"1234.5"});
      const Usd q = quote_collateral(s, 0, qty, px);
      const Usd v = value_of(qty, 18, px[0]);
      CHECK(q <= v);
      const bool no_discount = p->collaterals[0].liquidation_penalty() * p->sfp == Ratio::zero();
      if (no_discount) CHECK(q == v);
    }
  }

  TEST_CASE("property: losses are nonnegative and cumulative loss never falls") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> move(0.85, 1.1);
    for (int trial = 0; trial < 50; ++trial) {
      auto s = fx::eth_state(fx::eth_market(), "1000");
      absorb(s, "alice", prices({"2700"}), 1);
      Usd last;
      double px = 2700.0;
      for (int k = 0; k < 4; ++k) {
        px *= move(rng);
        const auto pv = market::PriceVector{{Usd::from_double(std::round(px * 100) / 100)}};
        buy_collateral(s, 0, TokenAmount::parse("0.25", 18), pv, 2 + k);
        CHECK(s.loss_ledger.back().loss_usd >= Usd::zero());
        CHECK(total_loss(s) >= last);
        last = total_loss(s);
      }
    }
  }
}
