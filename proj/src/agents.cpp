#include "risksim/agents.hpp"

#include "risksim/errors.hpp"

namespace risksim::agents {

using market::MarketState;
using market::PriceVector;

namespace {

Ratio percent_to_ratio(double pct) { return Ratio::from_raw(detail::div_half_even(Ratio::from_double(pct).raw(), 100)); }

}  // namespace

std::vector<market::Account> init_borrowers(const std::vector<market::Account>& snapshot, const PriceVector& prices,
                                            const market::MarketParams& params, const BorrowerFilter& filter) {
  std::vector<market::Account> admitted;
  for (const auto& a : snapshot) {
    if (a.base_borrowed < filter.min_borrow_usd) continue;
    if (market::health_factor(a, prices, params) > filter.max_health_factor) continue;
    admitted.push_back(a);
  }
  return admitted;
}

ProfitReport price_lot(const MarketState& state, std::size_t asset, TokenAmount qty, const PriceVector& prices,
                       const slippage::SlippageModel& model, const LiquidatorConfig& config) {
  const auto& cfg = state.params().collaterals.at(asset);
  ProfitReport r;
  r.asset = asset;
  r.quantity = qty;
  r.sale_proceeds = value_of(qty, cfg.asset.decimals, prices[asset]);
  r.purchase_cost = market::quote_collateral(state, asset, qty, prices);
  r.fee_paid = r.sale_proceeds * config.trading_fee;
  r.slippage_pct = r.sale_proceeds > Usd::zero() ? slippage::eval_slippage(model, r.sale_proceeds.to_double()) : 0.0;
  r.slippage_cost = r.sale_proceeds * percent_to_ratio(r.slippage_pct);
  r.profit = r.sale_proceeds - r.purchase_cost - r.fee_paid - r.slippage_cost;
  return r;
}

bool should_buy(const MarketState& state, std::size_t asset, TokenAmount qty, const PriceVector& prices,
                const slippage::SlippageModel& model, const LiquidatorConfig& config) {
  if (state.base_reserve >= state.params().target_reserve) return false;
  if (qty.units <= 0 || qty > state.for_sale.at(asset)) return false;
  const auto& cfg = state.params().collaterals[asset];
  const Usd value = value_of(qty, cfg.asset.decimals, prices[asset]);
  if (value <= Usd::zero()) return false;

  // Everything in percent: slippage% (+ 100·f) ≤ 100·lp·sfp
  const Ratio hundred = Ratio::from_int(100);
  Ratio cost = Ratio::from_double(slippage::eval_slippage(model, value.to_double()));
  if (config.fee_in_threshold) cost += hundred * config.trading_fee;
  const Ratio threshold = hundred * cfg.liquidation_penalty() * state.params().sfp;
  return cost <= threshold;
}

std::optional<ProfitReport> execute_liquidation(MarketState& state, std::size_t asset, const PriceVector& prices,
                                                const slippage::SlippageModel& model, const LiquidatorConfig& config,
                                                std::int64_t step) {
  const TokenAmount inventory = state.for_sale.at(asset);
  if (inventory.units <= 0 || state.base_reserve >= state.params().target_reserve) return std::nullopt;
  const int decimals = state.params().collaterals[asset].asset.decimals;

  TokenAmount qty = inventory;
  if (value_of(qty, decimals, prices[asset]) > config.max_lot_usd) {
    qty = quantity_for(config.max_lot_usd, decimals, prices[asset]);
  }
  while (qty.units > 0) {
    if (should_buy(state, asset, qty, prices, model, config)) break;
    qty.units /= 2;
    if (value_of(qty, decimals, prices[asset]) < config.min_lot_usd) return std::nullopt;
  }
  if (qty.units <= 0) return std::nullopt;

  ProfitReport report = price_lot(state, asset, qty, prices, model, config);
  // The flash-borrowed base covers P_C within the step at no cost.
  report.sale = market::buy_collateral(state, asset, qty, prices, step);
  return report;
}

SupplierLedger init_supplier_liquidity(const std::vector<SupplierRow>& rows) {
  SupplierLedger ledger;
  for (const auto& row : rows) {
    if (row.amount < Usd::zero()) throw DomainError("supplier '" + row.id + "' has a negative balance");
    ledger.balances[row.id] += row.amount;
    ledger.total += row.amount;
  }
  return ledger;
}

}  // namespace risksim::agents
