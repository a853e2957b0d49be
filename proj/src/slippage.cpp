#include "risksim/slippage.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "risksim/errors.hpp"

namespace risksim::slippage {

double eval_slippage(const SlippageModel& model, double sell_usd) {
  if (!(sell_usd > 0.0) || !std::isfinite(sell_usd)) throw DomainError("sell size must be positive");
  const double x = model.form == Form::log_linear ? std::log(sell_usd) : sell_usd;
  double y = model.intercept + model.coefficient * x;
  if (model.unit == Unit::fraction) y *= 100.0;
  return std::max(0.0, y);
}

SlippageModel fit_slippage(const std::vector<SlippageSample>& samples, Form form, std::string asset) {
  if (samples.size() < 3) throw DomainError("slippage fit needs at least 3 samples");
  const double n = double(samples.size());
  std::vector<double> xs;
  xs.reserve(samples.size());
  for (const auto& s : samples) {
    if (!(s.sell_usd > 0.0)) throw DomainError("sell size must be positive");
    xs.push_back(form == Form::log_linear ? std::log(s.sell_usd) : s.sell_usd);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += samples[i].slippage_pct;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (samples[i].slippage_pct - my);
  }
  if (!(sxx > 0.0)) throw DomainError("degenerate design: all sell sizes are equal");
  const double b = sxy / sxx;
  return SlippageModel{form, my - b * mx, b, std::move(asset), Unit::percent};
}

std::vector<SlippageSample> clean_samples(const std::vector<SlippageSample>& samples, const CleanOptions& options) {
  std::vector<SlippageSample> kept;
  std::set<std::pair<double, double>> seen;
  for (const auto& s : samples) {
    if (s.slippage_pct < 0.0) continue;
    if (!seen.insert({s.sell_usd, s.slippage_pct}).second) continue;
    kept.push_back(s);
  }
  if (kept.empty() || options.whale_percentile >= 1.0) return kept;

  std::vector<double> sells;
  for (const auto& s : kept) sells.push_back(s.sell_usd);
  std::sort(sells.begin(), sells.end());
  const auto rank = std::size_t(std::ceil(options.whale_percentile * double(sells.size())));
  const double cutoff = sells[std::max<std::size_t>(rank, 1) - 1];
  std::erase_if(kept, [&](const SlippageSample& s) { return s.sell_usd > cutoff; });
  return kept;
}

std::vector<SlippageModel> default_models() {
  return {
      {Form::log_linear, 0.0421, 0.0129, "WBTC", Unit::percent},
      {Form::log_linear, 0.057, 0.0023, "WETH", Unit::percent},
      {Form::log_linear, -0.124, 0.0244, "ARB", Unit::percent},
      {Form::linear, 0.186, 2e-4, "GMX", Unit::percent},
  };
}

SlippageModel default_model(const std::string& symbol) {
  const std::string key = symbol == "ETH" ? "WETH" : symbol;
  for (auto m : default_models()) {
    if (m.asset == key) {
      m.asset = symbol;
      return m;
    }
  }
  throw ConfigError("no default slippage curve for '" + symbol + "'");
}

std::string to_string(Form form) { return form == Form::log_linear ? "log_linear" : "linear"; }

Form form_from_string(const std::string& text) {
  if (text == "log_linear" || text == "log") return Form::log_linear;
  if (text == "linear") return Form::linear;
  throw ConfigError("unknown slippage form '" + text + "'");
}

}  // namespace risksim::slippage
