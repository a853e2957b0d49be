#pragma once

#include <memory>
#include <string>
#include <vector>

#include "risksim/engine.hpp"
#include "risksim/market.hpp"

namespace fx {

using namespace risksim;

inline Usd usd(const char* s) { return Usd::parse(s); }
inline Ratio ratio(const char* s) { return Ratio::parse(s); }

inline market::CollateralConfig collateral(const std::string& symbol, int decimals, const char* bcf, const char* lcf,
                                           const char* lf, const char* cap = "1000000") {
  return {{symbol, decimals}, ratio(bcf), ratio(lcf), ratio(lf), TokenAmount::parse(cap, decimals)};
}

/// One ETH collateral, zero interest: the worked liquidation example with an
/// LCF low enough for $2700 to cross the limit.
inline std::shared_ptr<const market::MarketParams> eth_market(const char* sfp = "0.6", const char* lcf = "0.88",
                                                              const char* target = "1000000") {
  auto p = std::make_shared<market::MarketParams>();
  p->sfp = ratio(sfp);
  p->target_reserve = usd(target);
  p->supply_ir = {Ratio{}, Ratio{}, Ratio{}, ratio("0.8")};
  p->borrow_ir = {Ratio{}, Ratio{}, Ratio{}, ratio("0.8")};
  p->collaterals = {collateral("ETH", 18, "0.8", lcf, "0.95")};
  return p;
}

inline market::PriceVector prices(std::initializer_list<const char*> values) {
  market::PriceVector v;
  for (const char* s : values) v.usd.push_back(usd(s));
  return v;
}

/// Market holding one borrower with 1 ETH and $2400 of debt.
inline market::MarketState eth_state(std::shared_ptr<const market::MarketParams> params, const char* reserve) {
  market::MarketState s(params);
  s.total_base_supplied = usd("100000");
  s.total_base_borrowed = usd("2400");
  s.base_reserve = usd(reserve);
  s.add_account(market::make_account(*params, "alice", {{"ETH", TokenAmount::parse("1", 18)}}, usd("2400")));
  return s;
}

/// The single-borrower market above wrapped as a simulation scenario.
inline engine::Scenario eth_scenario(const char* reserve = "1000", const char* target = "1000000",
                                     std::uint64_t seed = 1) {
  const auto params = eth_market("0.6", "0.88", target);
  engine::Scenario sc;
  sc.params = params;
  sc.initial_state = eth_state(params, reserve);
  sc.garch = {price::GarchSpec{0.0, {}, {}, 1e-6, {0.05}, {0.9}}};
  sc.correlation = price::Matrix::identity(1);
  sc.origin_prices = prices({"3000"});
  sc.slippage = {{slippage::Form::linear, 0.5, 0.0, "ETH", slippage::Unit::percent}};
  sc.horizon_steps = 20;
  sc.master_seed = seed;
  return sc;
}

}  // namespace fx
