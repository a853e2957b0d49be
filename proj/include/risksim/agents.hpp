#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "risksim/market.hpp"
#include "risksim/slippage.hpp"

// Borrower admission, the liquidator's buy rule and profit accounting, and
// static supplier liquidity.
namespace risksim::agents {

struct BorrowerFilter {
  Usd min_borrow_usd = Usd::from_int(1000);
  Ratio max_health_factor = Ratio::from_int(2);
};

struct LiquidatorConfig {
  Ratio trading_fee = Ratio::parse("0.003");
  Usd max_lot_usd = Usd::from_int(250000);
  Usd min_lot_usd = Usd::from_int(100);
  /// Count the trading fee against the LP·SFP discount; off compares slippage alone.
  bool fee_in_threshold = true;
};

/// P = S_C − P_C − f·S_C − S
struct ProfitReport {
  std::size_t asset = 0;
  TokenAmount quantity;
  Usd sale_proceeds;  // S_C, market value of the lot
  Usd purchase_cost;  // P_C, storefront price paid to the protocol
  Usd fee_paid;       // f·S_C
  Usd slippage_cost;  // S
  Usd profit;         // P
  double slippage_pct = 0.0;
  market::SaleRecord sale;
};

/// Keeps borrowers with debt ≥ min_borrow_usd and health factor ≤ max_health_factor (both inclusive).
std::vector<market::Account> init_borrowers(const std::vector<market::Account>& snapshot,
                                            const market::PriceVector& prices, const market::MarketParams& params,
                                            const BorrowerFilter& filter = {});

/// Slippage (+ fee) within the storefront discount, and sales open.
bool should_buy(const market::MarketState& state, std::size_t asset, TokenAmount qty,
                const market::PriceVector& prices, const slippage::SlippageModel& model,
                const LiquidatorConfig& config);

/// Profit of buying `qty` at the storefront and selling it on the market, without executing.
ProfitReport price_lot(const market::MarketState& state, std::size_t asset, TokenAmount qty,
                       const market::PriceVector& prices, const slippage::SlippageModel& model,
                       const LiquidatorConfig& config);

/// Sizes a lot (inventory capped at max_lot_usd, halved until the buy rule passes or the lot
/// falls under min_lot_usd), buys it from the protocol with flash-borrowed base and sells it
/// on the market. Returns nothing when no lot qualifies; the market is then untouched.
std::optional<ProfitReport> execute_liquidation(market::MarketState& state, std::size_t asset,
                                                const market::PriceVector& prices,
                                                const slippage::SlippageModel& model, const LiquidatorConfig& config,
                                                std::int64_t step = 0);

struct SupplierRow {
  std::string id;
  Usd amount;
};

struct SupplierLedger {
  std::map<std::string, Usd> balances;
  Usd total;
};

/// Sums supplier rows; duplicate ids are merged.
SupplierLedger init_supplier_liquidity(const std::vector<SupplierRow>& rows);

}  // namespace risksim::agents
