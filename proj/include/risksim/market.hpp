#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "risksim/decimal.hpp"

// Single-base-asset lending market: collateral accounting, kinked interest
// curves, absorb, discounted collateral sales and the protocol-loss ledger.
// The base asset is USD-pegged; base quantities are carried as Usd.
namespace risksim::market {

struct AssetId {
  std::string symbol;
  int decimals = 18;

  friend bool operator==(const AssetId&, const AssetId&) = default;
};

struct CollateralConfig {
  AssetId asset;
  Ratio bcf;  // borrow collateral factor
  Ratio lcf;  // liquidation collateral factor
  Ratio lf;   // liquidation factor, share of value paid back on absorb
  TokenAmount supply_cap;

  Ratio liquidation_penalty() const { return Ratio::one() - lf; }
};

struct IRParams {
  Ratio base;
  Ratio slope_low;
  Ratio slope_high;
  Ratio kink;
};

struct MarketParams {
  AssetId base_asset{"USDC", 6};
  Ratio sfp;
  Usd target_reserve;
  IRParams supply_ir;
  IRParams borrow_ir;
  std::vector<CollateralConfig> collaterals;

  /// Position of `symbol` in `collaterals`; throws ConfigError when absent.
  std::size_t index_of(std::string_view symbol) const;
  std::size_t asset_count() const { return collaterals.size(); }
  /// Throws ValidationError listing every violated invariant.
  void validate() const;
};

/// USD price per whole token, aligned with MarketParams::collaterals.
struct PriceVector {
  std::vector<Usd> usd;

  static PriceVector from_map(const MarketParams& params, const std::map<std::string, Usd>& prices);
  Usd operator[](std::size_t asset) const { return usd[asset]; }
};

/// Collateral is dense and aligned with MarketParams::collaterals.
/// `base_borrowed` and `base_supplied` are principals at the market's
/// borrow/supply index; they equal present values while the index is 1.
struct Account {
  std::string id;
  std::vector<TokenAmount> collateral;
  Usd base_borrowed;
  Usd base_supplied;
};

/// Builds an account from symbol-keyed quantities; unknown symbols throw ConfigError.
Account make_account(const MarketParams& params, std::string id,
                     const std::map<std::string, TokenAmount>& collateral, Usd borrowed, Usd supplied = {});

struct AbsorbEvent {
  std::string account_id;
  std::vector<TokenAmount> seized;
  std::vector<Usd> value_per_asset;
  std::vector<Usd> payment_per_asset;
  Usd collateral_value_usd;
  Usd payment_usd;
  Usd debt_settled;
  Usd borrower_credit;
  Usd bad_debt_usd;  // debt not covered by the payment
  std::int64_t timestamp_step = 0;
};

enum class LossCause { price_decay_before_sale, unsold_at_horizon };

struct LossRecord {
  std::size_t asset = 0;
  Usd loss_usd;
  LossCause cause = LossCause::price_decay_before_sale;
  std::int64_t step = 0;
};

/// Open absorbed inventory with the payment still attributed to it.
struct InventoryLot {
  std::size_t event_index = 0;
  std::size_t asset = 0;
  TokenAmount remaining;
  Usd payment_remaining;
};

struct SaleRecord {
  std::size_t asset = 0;
  TokenAmount quantity;
  Usd market_value;
  Usd proceeds;
  Usd payment_attributed;
  Usd loss_usd;
  std::int64_t step = 0;
};

inline constexpr Ratio kInfiniteHealth = Ratio::from_raw(std::numeric_limits<int128>::max());

class MarketState {
 public:
  MarketState() = default;
  explicit MarketState(std::shared_ptr<const MarketParams> params);

  const MarketParams& params() const { return *params_; }
  const std::shared_ptr<const MarketParams>& shared_params() const { return params_; }

  /// Appends an account; its collateral counts against supply caps (throws RejectedError).
  std::size_t add_account(Account account);
  std::size_t find_account(std::string_view id) const;  // throws NotFoundError

  std::vector<Account> accounts;
  Usd total_base_supplied;
  Usd total_base_borrowed;
  Usd base_reserve;
  Ratio borrow_index = Ratio::one();
  Ratio supply_index = Ratio::one();
  std::int64_t elapsed_seconds = 0;
  std::vector<TokenAmount> posted_collateral;  // per asset, all accounts
  std::vector<TokenAmount> for_sale;
  std::vector<InventoryLot> lots;
  std::vector<AbsorbEvent> absorbed_book;
  std::vector<LossRecord> loss_ledger;
  bool settled = false;

 private:
  std::shared_ptr<const MarketParams> params_;
};

Usd borrowing_capacity(const Account& account, const PriceVector& prices, const MarketParams& params);
Usd liquidation_limit(const Account& account, const PriceVector& prices, const MarketParams& params);
/// Strict: debt exactly at the limit is not liquidatable.
bool is_liquidatable(const Account& account, const PriceVector& prices, const MarketParams& params);
/// liquidation_limit / debt, or kInfiniteHealth without debt.
Ratio health_factor(const Account& account, const PriceVector& prices, const MarketParams& params);

/// Debt including interest accrued since the snapshot.
Usd present_debt(const MarketState& state, const Account& account);
bool is_liquidatable(const MarketState& state, std::size_t account_index, const PriceVector& prices);

Ratio utilization(const MarketState& state);
Ratio supply_rate(Ratio u, const IRParams& ir);
Ratio borrow_rate(Ratio u, const IRParams& ir);

/// Simple (non-compounding) per-second accrual over `dt_seconds`.
void accrue(MarketState& state, std::int64_t dt_seconds);

/// Posts collateral for an existing account, refusing anything above the supply cap.
void supply_collateral(MarketState& state, std::size_t account_index, std::size_t asset, TokenAmount qty);

/// Seizes all collateral of a liquidatable account, settles its debt from
/// reserves and credits any payment excess back to it as base supply.
AbsorbEvent absorb(MarketState& state, std::string_view account_id, const PriceVector& prices, std::int64_t step);
AbsorbEvent absorb_index(MarketState& state, std::size_t account_index, const PriceVector& prices, std::int64_t step);

/// Storefront price: qty·price·(1 − lp·sfp).
Usd quote_collateral(const MarketState& state, std::size_t asset, TokenAmount qty, const PriceVector& prices);

/// Sells absorbed inventory at the storefront price while reserves are under target.
SaleRecord buy_collateral(MarketState& state, std::size_t asset, TokenAmount qty, const PriceVector& prices,
                          std::int64_t step);

/// Marks every unsold lot at the storefront price and books shortfalls. Returns the ledger total.
Usd settle_horizon(MarketState& state, const PriceVector& final_prices, std::int64_t step);

Usd total_loss(const MarketState& state);

}  // namespace risksim::market
