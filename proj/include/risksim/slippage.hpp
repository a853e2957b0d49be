#pragma once

#include <string>
#include <vector>

// Order size (USD sold) to slippage percentage curves.
namespace risksim::slippage {

enum class Form { log_linear, linear };

/// Whether a model's equation yields a percentage or a fraction.
enum class Unit { percent, fraction };

struct SlippageModel {
  Form form = Form::log_linear;
  double intercept = 0.0;
  double coefficient = 0.0;
  std::string asset;
  Unit unit = Unit::percent;

  friend bool operator==(const SlippageModel&, const SlippageModel&) = default;
};

struct SlippageSample {
  double sell_usd = 0.0;
  double slippage_pct = 0.0;

  friend bool operator==(const SlippageSample&, const SlippageSample&) = default;
};

/// Slippage in percent for a sale of `sell_usd`, never negative.
double eval_slippage(const SlippageModel& model, double sell_usd);

/// Ordinary least squares of slippage on sell (linear) or ln(sell) (log_linear).
SlippageModel fit_slippage(const std::vector<SlippageSample>& samples, Form form, std::string asset = {});

struct CleanOptions {
  double whale_percentile = 0.995;  // sells strictly above this nearest-rank percentile are dropped
};

/// Drops negative-slippage rows, merges exact duplicates and removes whale-sized sells.
std::vector<SlippageSample> clean_samples(const std::vector<SlippageSample>& samples, const CleanOptions& options = {});

/// Published curves for WBTC, ETH (WETH), ARB and GMX.
std::vector<SlippageModel> default_models();
/// Default curve for `symbol` ("ETH" and "WETH" share one); throws ConfigError when unknown.
SlippageModel default_model(const std::string& symbol);

std::string to_string(Form form);
Form form_from_string(const std::string& text);

}  // namespace risksim::slippage
