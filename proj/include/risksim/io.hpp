#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "risksim/agents.hpp"
#include "risksim/engine.hpp"
#include "risksim/market.hpp"
#include "risksim/price_model.hpp"
#include "risksim/slippage.hpp"

// Config, snapshot and report files. All JSON inputs are parsed strictly:
// unknown fields are errors and every problem is reported at once.
namespace risksim::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct ScenarioSettings {
  std::int64_t horizon_steps = 1728;
  std::int64_t step_seconds = 50;
  std::size_t paths_per_round = 5000;
  std::size_t rounds = 3;
  std::size_t max_rounds = 10;
  engine::Tolerance tolerance;
  std::uint64_t seed = kDefaultSeed;
  std::size_t lar_bins = 100;
};

struct ConfigFile {
  market::MarketParams market;
  std::vector<price::GarchSpec> garch;  // aligned with market.collaterals
  price::CorrelationMatrix correlation;
  std::vector<slippage::SlippageModel> slippage;  // aligned; published defaults fill gaps
  agents::LiquidatorConfig liquidator;
  agents::BorrowerFilter borrower_filter;
  ScenarioSettings scenario;
  std::string canonical;  // compact sorted JSON of the source document
};

struct SnapshotFile {
  std::int64_t block_height = 0;
  std::map<std::string, Usd> prices;
  std::vector<market::Account> accounts;
  std::vector<agents::SupplierRow> suppliers;
  Usd base_reserve;
  std::string canonical;
};

/// "1%" → relative 0.01, "250" → absolute $250, "inf" → never binding.
engine::Tolerance parse_tolerance(const std::string& text);

ConfigFile parse_config(const std::string& text, const std::string& origin = "<config>");
ConfigFile load_config(const std::filesystem::path& path);

SnapshotFile parse_snapshot(const std::string& text, const ConfigFile& config, const std::string& origin = "<snapshot>");
SnapshotFile load_snapshot(const std::filesystem::path& path, const ConfigFile& config);

/// Validated, immutable scenario. `seed` overrides the configured master seed.
engine::Scenario build_scenario(const ConfigFile& config, const SnapshotFile& snapshot,
                                std::optional<std::uint64_t> seed = std::nullopt);

/// Stable hash of config, snapshot and seed.
std::string fingerprint(const ConfigFile& config, const SnapshotFile& snapshot, std::uint64_t seed);

std::string report_to_json(const engine::RiskReport& report);
engine::RiskReport report_from_json(const std::string& text);

enum class ReportFormat { json, csv };

/// JSON: one file at `path`. CSV: a directory at `path` with one file per table.
void write_report(const engine::RiskReport& report, const std::filesystem::path& path, ReportFormat format);
engine::RiskReport read_report(const std::filesystem::path& path);

/// CSV with header `timestamp,asset,price`; returns prices of `asset` ordered by timestamp.
std::vector<double> load_price_series(const std::filesystem::path& path, const std::string& asset);

/// JSON array of {sell, slippagePercent}, or an object keyed by asset holding such arrays.
std::vector<slippage::SlippageSample> load_slippage_samples(const std::filesystem::path& path,
                                                            const std::string& asset);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace risksim::io
