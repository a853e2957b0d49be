#include "risksim/market.hpp"

#include <algorithm>
#include <set>

#include "risksim/errors.hpp"

namespace risksim::market {

namespace {

void check_prices(const PriceVector& prices, const MarketParams& params) {
  if (prices.usd.size() != params.collaterals.size()) {
    throw ConfigError("price vector has " + std::to_string(prices.usd.size()) + " entries, market has " +
                      std::to_string(params.collaterals.size()) + " collateral assets");
  }
}

void check_account(const Account& account, const MarketParams& params) {
  if (account.collateral.size() != params.collaterals.size()) {
    throw ConfigError("account '" + account.id + "' collateral does not match the configured assets");
  }
}

template <typename FactorOf>
Usd weighted_value(const Account& account, const PriceVector& prices, const MarketParams& params, FactorOf factor) {
  check_account(account, params);
  check_prices(prices, params);
  Usd total;
  for (std::size_t i = 0; i < params.collaterals.size(); ++i) {
    const auto& cfg = params.collaterals[i];
    if (account.collateral[i].units == 0) continue;
    total += value_of(account.collateral[i], cfg.asset.decimals, prices[i]) * factor(cfg);
  }
  return total;
}

Ratio kinked_rate(Ratio u, const IRParams& ir) {
  if (u < Ratio::zero() || u > Ratio::one()) throw DomainError("utilization outside [0, 1]: " + u.to_string());
  if (u <= ir.kink) return ir.base + ir.slope_low * u;
  return ir.base + ir.slope_low * ir.kink + ir.slope_high * (u - ir.kink);
}

Ratio storefront_discount(const MarketParams& params, std::size_t asset) {
  return Ratio::one() - params.collaterals[asset].liquidation_penalty() * params.sfp;
}

Usd grow(Usd amount, Ratio rate, std::int64_t dt) { return amount * Ratio::from_raw(rate.raw() * dt); }

}  // namespace

std::size_t MarketParams::index_of(std::string_view symbol) const {
  for (std::size_t i = 0; i < collaterals.size(); ++i) {
    if (collaterals[i].asset.symbol == symbol) return i;
  }
  throw ConfigError("unknown collateral asset '" + std::string(symbol) + "'");
}

void MarketParams::validate() const {
  std::vector<std::string> problems;
  auto check_asset = [&](const AssetId& a, const std::string& where) {
    if (a.symbol.empty()) problems.push_back(where + ": empty symbol");
    if (a.decimals < 0 || a.decimals > 18) problems.push_back(where + ": decimals must be in [0, 18]");
  };
  auto check_ir = [&](const IRParams& ir, const std::string& where) {
    if (ir.base < Ratio::zero() || ir.slope_low < Ratio::zero() || ir.slope_high < Ratio::zero())
      problems.push_back(where + ": rates must be >= 0");
    if (ir.slope_high < ir.slope_low) problems.push_back(where + ": slope_high must be >= slope_low");
    if (ir.kink <= Ratio::zero() || ir.kink >= Ratio::one()) problems.push_back(where + ": kink must be in (0, 1)");
  };

  check_asset(base_asset, "base asset");
  if (sfp < Ratio::zero() || sfp > Ratio::one()) problems.push_back("storefront price factor must be in [0, 1]");
  if (target_reserve < Usd::zero()) problems.push_back("target reserve must be >= 0");
  check_ir(supply_ir, "supply rate");
  check_ir(borrow_ir, "borrow rate");

  std::set<std::string> seen;
  for (const auto& c : collaterals) {
    const std::string where = "collateral '" + c.asset.symbol + "'";
    check_asset(c.asset, where);
    if (!seen.insert(c.asset.symbol).second) problems.push_back(where + ": duplicate asset");
    if (c.asset.symbol == base_asset.symbol) problems.push_back(where + ": collateral cannot be the base asset");
    if (!(Ratio::zero() < c.bcf && c.bcf < c.lcf && c.lcf <= Ratio::one()))
      problems.push_back(where + ": requires 0 < bcf < lcf <= 1");
    if (!(Ratio::zero() < c.lf && c.lf <= Ratio::one())) problems.push_back(where + ": requires 0 < lf <= 1");
    if (c.supply_cap.units < 0) problems.push_back(where + ": supply cap must be >= 0");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

PriceVector PriceVector::from_map(const MarketParams& params, const std::map<std::string, Usd>& prices) {
  PriceVector out;
  out.usd.reserve(params.collaterals.size());
  for (const auto& c : params.collaterals) {
    auto it = prices.find(c.asset.symbol);
    if (it == prices.end()) throw ConfigError("no price for '" + c.asset.symbol + "'");
    if (it->second <= Usd::zero()) throw DomainError("price for '" + c.asset.symbol + "' must be positive");
    out.usd.push_back(it->second);
  }
  for (const auto& [symbol, _] : prices) {
    if (symbol != params.base_asset.symbol) params.index_of(symbol);
  }
  return out;
}

Account make_account(const MarketParams& params, std::string id, const std::map<std::string, TokenAmount>& collateral,
                     Usd borrowed, Usd supplied) {
  Account a{std::move(id), std::vector<TokenAmount>(params.collaterals.size()), borrowed, supplied};
  for (const auto& [symbol, qty] : collateral) a.collateral[params.index_of(symbol)] = qty;
  return a;
}

MarketState::MarketState(std::shared_ptr<const MarketParams> params)
    : posted_collateral(params->collaterals.size()), for_sale(params->collaterals.size()), params_(std::move(params)) {}

std::size_t MarketState::add_account(Account account) {
  check_account(account, *params_);
  for (std::size_t i = 0; i < account.collateral.size(); ++i) {
    if (posted_collateral[i] + account.collateral[i] > params_->collaterals[i].supply_cap) {
      throw RejectedError("supply cap exceeded for '" + params_->collaterals[i].asset.symbol + "' by account '" +
                          account.id + "'");
    }
  }
  for (std::size_t i = 0; i < account.collateral.size(); ++i) posted_collateral[i] += account.collateral[i];
  accounts.push_back(std::move(account));
  return accounts.size() - 1;
}

std::size_t MarketState::find_account(std::string_view id) const {
  for (std::size_t i = 0; i < accounts.size(); ++i) {
    if (accounts[i].id == id) return i;
  }
  throw NotFoundError("no account '" + std::string(id) + "'");
}

Usd borrowing_capacity(const Account& account, const PriceVector& prices, const MarketParams& params) {
  return weighted_value(account, prices, params, [](const CollateralConfig& c) { return c.bcf; });
}

Usd liquidation_limit(const Account& account, const PriceVector& prices, const MarketParams& params) {
  return weighted_value(account, prices, params, [](const CollateralConfig& c) { return c.lcf; });
}

bool is_liquidatable(const Account& account, const PriceVector& prices, const MarketParams& params) {
  if (account.base_borrowed <= Usd::zero()) return false;
  return account.base_borrowed > liquidation_limit(account, prices, params);
}

Ratio health_factor(const Account& account, const PriceVector& prices, const MarketParams& params) {
  const Usd limit = liquidation_limit(account, prices, params);
  if (account.base_borrowed <= Usd::zero()) return kInfiniteHealth;
  return div<18>(limit, account.base_borrowed);
}

Usd present_debt(const MarketState& state, const Account& account) {
  return account.base_borrowed * state.borrow_index;
}

bool is_liquidatable(const MarketState& state, std::size_t account_index, const PriceVector& prices) {
  const Account& a = state.accounts.at(account_index);
  const Usd debt = present_debt(state, a);
  if (debt <= Usd::zero()) return false;
  return debt > liquidation_limit(a, prices, state.params());
}

Ratio utilization(const MarketState& state) {
  if (state.total_base_supplied <= Usd::zero()) return Ratio::zero();
  const Ratio u = div<18>(state.total_base_borrowed, state.total_base_supplied);
  return std::clamp(u, Ratio::zero(), Ratio::one());
}

Ratio supply_rate(Ratio u, const IRParams& ir) { return kinked_rate(u, ir); }
Ratio borrow_rate(Ratio u, const IRParams& ir) { return kinked_rate(u, ir); }

void accrue(MarketState& state, std::int64_t dt_seconds) {
  if (dt_seconds < 0) throw DomainError("negative accrual interval");
  if (dt_seconds == 0) return;
  const Ratio u = utilization(state);
  const Ratio br = borrow_rate(u, state.params().borrow_ir);
  const Ratio sr = supply_rate(u, state.params().supply_ir);
  const Usd borrow_interest = grow(state.total_base_borrowed, br, dt_seconds);
  const Usd supply_interest = grow(state.total_base_supplied, sr, dt_seconds);
  state.total_base_borrowed += borrow_interest;
  state.total_base_supplied += supply_interest;
  state.base_reserve += borrow_interest - supply_interest;
  state.borrow_index += state.borrow_index * Ratio::from_raw(br.raw() * dt_seconds);
  state.supply_index += state.supply_index * Ratio::from_raw(sr.raw() * dt_seconds);
  state.elapsed_seconds += dt_seconds;
}

void supply_collateral(MarketState& state, std::size_t account_index, std::size_t asset, TokenAmount qty) {
  if (qty.units < 0) throw DomainError("negative collateral quantity");
  const auto& cfg = state.params().collaterals.at(asset);
  if (state.posted_collateral[asset] + qty > cfg.supply_cap) {
    throw RejectedError("supply cap exceeded for '" + cfg.asset.symbol + "'");
  }
  state.accounts.at(account_index).collateral[asset] += qty;
  state.posted_collateral[asset] += qty;
}

AbsorbEvent absorb(MarketState& state, std::string_view account_id, const PriceVector& prices, std::int64_t step) {
  return absorb_index(state, state.find_account(account_id), prices, step);
}

AbsorbEvent absorb_index(MarketState& state, std::size_t account_index, const PriceVector& prices,
                         std::int64_t step) {
  const MarketParams& params = state.params();
  check_prices(prices, params);
  if (!is_liquidatable(state, account_index, prices)) {
    throw RejectedError("account '" + state.accounts.at(account_index).id + "' is not liquidatable");
  }
  Account& account = state.accounts[account_index];
  const std::size_t n = params.collaterals.size();

  AbsorbEvent ev;
  ev.account_id = account.id;
  ev.seized = account.collateral;
  ev.value_per_asset.assign(n, Usd{});
  ev.payment_per_asset.assign(n, Usd{});
  ev.timestamp_step = step;
  for (std::size_t i = 0; i < n; ++i) {
    if (ev.seized[i].units == 0) continue;
    ev.value_per_asset[i] = value_of(ev.seized[i], params.collaterals[i].asset.decimals, prices[i]);
    ev.payment_per_asset[i] = ev.value_per_asset[i] * params.collaterals[i].lf;
    ev.collateral_value_usd += ev.value_per_asset[i];
    ev.payment_usd += ev.payment_per_asset[i];
  }

  const Usd debt = present_debt(state, account);
  ev.debt_settled = debt;
  ev.borrower_credit = std::max(Usd::zero(), ev.payment_usd - debt);
  ev.bad_debt_usd = std::max(Usd::zero(), debt - ev.payment_usd);

  state.total_base_borrowed = std::max(Usd::zero(), state.total_base_borrowed - debt);
  state.base_reserve -= debt + ev.borrower_credit;
  account.base_borrowed = Usd::zero();
  if (ev.borrower_credit > Usd::zero()) {
    account.base_supplied += div<8>(ev.borrower_credit, state.supply_index);
    state.total_base_supplied += ev.borrower_credit;
  }

  const std::size_t event_index = state.absorbed_book.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (ev.seized[i].units == 0) continue;
    state.for_sale[i] += ev.seized[i];
    state.posted_collateral[i] -= ev.seized[i];
    state.lots.push_back({event_index, i, ev.seized[i], ev.payment_per_asset[i]});
    account.collateral[i] = TokenAmount{};
  }
  state.absorbed_book.push_back(ev);
  return ev;
}

Usd quote_collateral(const MarketState& state, std::size_t asset, TokenAmount qty, const PriceVector& prices) {
  const MarketParams& params = state.params();
  check_prices(prices, params);
  if (qty.units < 0) throw DomainError("negative quantity");
  if (qty > state.for_sale.at(asset)) {
    throw RejectedError("insufficient absorbed inventory of '" + params.collaterals[asset].asset.symbol + "'");
  }
  return value_of(qty, params.collaterals[asset].asset.decimals, prices[asset]) * storefront_discount(params, asset);
}

SaleRecord buy_collateral(MarketState& state, std::size_t asset, TokenAmount qty, const PriceVector& prices,
                          std::int64_t step) {
  const MarketParams& params = state.params();
  if (state.base_reserve >= params.target_reserve) {
    throw RejectedError("collateral sales closed: reserves at or above target");
  }
  if (qty.units <= 0) throw DomainError("sale quantity must be positive");
  const Usd proceeds = quote_collateral(state, asset, qty, prices);
  const int decimals = params.collaterals[asset].asset.decimals;

  SaleRecord sale;
  sale.asset = asset;
  sale.quantity = qty;
  sale.market_value = value_of(qty, decimals, prices[asset]);
  sale.proceeds = proceeds;
  sale.step = step;

  // FIFO over lots; proceeds split by quantity, the last portion takes the remainder.
  TokenAmount left = qty;
  Usd proceeds_left = proceeds;
  for (auto& lot : state.lots) {
    if (left.units == 0) break;
    if (lot.asset != asset || lot.remaining.units == 0) continue;
    const TokenAmount take{std::min(left.units, lot.remaining.units)};
    const Usd attributed =
        take == lot.remaining
            ? lot.payment_remaining
            : Usd::from_raw(detail::div_half_even(lot.payment_remaining.raw() * take.units, lot.remaining.units));
    const Usd portion = take == left ? proceeds_left
                                     : Usd::from_raw(detail::div_half_even(proceeds.raw() * take.units, qty.units));
    sale.payment_attributed += attributed;
    sale.loss_usd += std::max(Usd::zero(), attributed - portion);
    lot.remaining -= take;
    lot.payment_remaining -= attributed;
    left -= take;
    proceeds_left -= portion;
  }
  std::erase_if(state.lots, [](const InventoryLot& l) { return l.remaining.units == 0; });

  state.for_sale[asset] -= qty;
  state.base_reserve += proceeds;
  state.loss_ledger.push_back({asset, sale.loss_usd, LossCause::price_decay_before_sale, step});
  return sale;
}

Usd settle_horizon(MarketState& state, const PriceVector& final_prices, std::int64_t step) {
  if (!state.settled) {
    for (const auto& lot : state.lots) {
      if (lot.remaining.units == 0) continue;
      const Usd mark = quote_collateral(state, lot.asset, lot.remaining, final_prices);
      const Usd loss = std::max(Usd::zero(), lot.payment_remaining - mark);
      state.loss_ledger.push_back({lot.asset, loss, LossCause::unsold_at_horizon, step});
    }
    state.settled = true;
  }
  return total_loss(state);
}

Usd total_loss(const MarketState& state) {
  Usd total;
  for (const auto& r : state.loss_ledger) total += r.loss_usd;
  return total;
}

}  // namespace risksim::market
