#include <cmath>
#include <random>

#include "doctest.h"
#include "risksim/errors.hpp"
#include "risksim/slippage.hpp"

using namespace risksim;
using namespace risksim::slippage;

TEST_SUITE("slippage") {
  TEST_CASE("published curves") {
    CHECK(eval_slippage(default_model("WBTC"), 1.0) == doctest::Approx(0.0421).epsilon(1e-12));
    CHECK(eval_slippage(default_model("GMX"), 1000.0) == doctest::Approx(0.386).epsilon(1e-12));
    CHECK(eval_slippage(default_model("ETH"), std::exp(2.0)) == doctest::Approx(0.057 + 0.0046).epsilon(1e-12));
    CHECK(default_model("ETH").intercept == default_model("WETH").intercept);
    // ARB's intercept is negative: small sells clamp to zero
    CHECK(eval_slippage(default_model("ARB"), 10.0) == 0.0);
    CHECK_THROWS_AS(default_model("DOGE"), ConfigError);
  }

  TEST_CASE("domain") {
    CHECK_THROWS_AS(eval_slippage(default_model("WBTC"), 0.0), DomainError);
    CHECK_THROWS_AS(eval_slippage(default_model("WBTC"), -5.0), DomainError);
  }

  TEST_CASE("fraction unit reports percent") {
    SlippageModel m{Form::linear, 0.01, 0.0, "X", Unit::fraction};
    CHECK(eval_slippage(m, 100.0) == doctest::Approx(1.0));
  }

  TEST_CASE("monotone in sell size for positive slope") {
    for (const auto& m : default_models()) {
      double prev = 0.0;
      for (double s = 1.0; s < 1e7; s *= 1.7) {
        const double v = eval_slippage(m, s);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        prev = v;
      }
    }
  }

  TEST_CASE("noiseless refit recovers the model") {
    std::vector<SlippageSample> log_samples, lin_samples;
    for (double s : {10.0, 250.0, 1e3, 4e4, 7e5, 2e6}) {
      log_samples.push_back({s, 0.05 + 0.01 * std::log(s)});
      lin_samples.push_back({s, 0.186 + 2e-4 * s});
    }
    const auto a = fit_slippage(log_samples, Form::log_linear, "X");
    CHECK(std::abs(a.intercept - 0.05) < 1e-9);
    CHECK(std::abs(a.coefficient - 0.01) < 1e-9);
    const auto b = fit_slippage(lin_samples, Form::linear, "GMX");
    CHECK(std::abs(b.intercept - 0.186) < 1e-9);
    CHECK(std::abs(b.coefficient - 2e-4) < 1e-9);
  }

  TEST_CASE("noisy linear fit") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> sell(100.0, 20000.0);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<SlippageSample> samples;
    for (int i = 0; i < 1000; ++i) {
      const double s = sell(rng);
      samples.push_back({s, 0.186 + 2e-4 * s + noise(rng)});
    }
    const auto m = fit_slippage(samples, Form::linear);
    CHECK(std::abs(m.coefficient - 2e-4) < 0.1 * 2e-4);
  }

  TEST_CASE("degenerate designs") {
    CHECK_THROWS_AS(fit_slippage({{100, 0.1}, {100, 0.2}}, Form::linear), DomainError);
    CHECK_THROWS_AS(fit_slippage({{100, 0.1}, {100, 0.2}, {100, 0.3}}, Form::linear), DomainError);
  }

  TEST_CASE("cleaning") {
    CHECK(clean_samples({}).empty());
    const auto no_negative = clean_samples({{100, -0.1}, {200, 0.2}});
    REQUIRE(no_negative.size() == 1);
    CHECK(no_negative[0].sell_usd == 200);
    CHECK(clean_samples({{100, 0.1}, {100, 0.1}, {150, 0.2}}).size() == 2);

    std::vector<SlippageSample> with_whale;
    for (int i = 1; i <= 999; ++i) with_whale.push_back({double(i), 0.1});
    with_whale.push_back({1e9, 5.0});
    const auto cleaned = clean_samples(with_whale);
    CHECK(cleaned.size() == 995);
    for (const auto& s : cleaned) CHECK(s.sell_usd < 1e9);
  }

  TEST_CASE("form names") {
    CHECK(form_from_string("log") == Form::log_linear);
    CHECK(form_from_string(to_string(Form::linear)) == Form::linear);
    CHECK_THROWS_AS(form_from_string("quadratic"), ConfigError);
  }
}
