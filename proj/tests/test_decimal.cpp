#include "doctest.h"
#include "risksim/decimal.hpp"
#include "risksim/errors.hpp"

using namespace risksim;

TEST_SUITE("decimal") {
  TEST_CASE("parse is exact") {
    CHECK(Ratio::parse("0.92").raw() == int128(920000000000000000LL));
    CHECK(Usd::parse("2565").raw() == int128(256500000000LL));
    CHECK(Usd::parse("-1.5").raw() == int128(-150000000));
    CHECK(Usd::parse("1e3") == Usd::from_int(1000));
    CHECK(Usd::parse("2.5E-2") == Usd::parse("0.025"));
  }

  TEST_CASE("parse rejects garbage and excess precision") {
    CHECK_THROWS_AS(Usd::parse("abc"), DomainError);
    CHECK_THROWS_AS(Usd::parse(""), DomainError);
    CHECK_THROWS_AS(Usd::parse("1.2.3"), DomainError);
  }

  TEST_CASE("round half to even") {
    CHECK(detail::div_half_even(25, 10) == 2);
    CHECK(detail::div_half_even(35, 10) == 4);
    CHECK(detail::div_half_even(26, 10) == 3);
    CHECK(detail::div_half_even(-25, 10) == -2);
    CHECK(detail::div_half_even(-35, 10) == -4);
    // 0.00000005 × 0.5 = 0.000000025 → 0.00000002
    CHECK((Usd::from_raw(5) * Ratio::parse("0.5")).raw() == 2);
    CHECK((Usd::from_raw(7) * Ratio::parse("0.5")).raw() == 4);
  }

  TEST_CASE("formatting") {
    CHECK(Usd::parse("2565").to_string() == "2565.00000000");
    CHECK(Usd::parse("-0.5").to_string() == "-0.50000000");
    CHECK(TokenAmount::parse("1.5", 18).to_string(18) == "1.500000000000000000");
  }

  TEST_CASE("from_double uses the shortest decimal representation") {
    CHECK(Ratio::from_double(0.1) == Ratio::parse("0.1"));
    CHECK(Ratio::from_double(0.92) == Ratio::parse("0.92"));
    CHECK(Usd::from_double(2461.86) == Usd::parse("2461.86"));
  }

  TEST_CASE("products and quotients") {
    CHECK(Usd::parse("2700") * Ratio::parse("0.95") == Usd::parse("2565"));
    CHECK(Ratio::parse("0.05") * Ratio::parse("0.6") == Ratio::parse("0.03"));
    CHECK(div<18>(Usd::parse("2484"), Usd::parse("2400")) == Ratio::parse("1.035"));
  }

  TEST_CASE("token values") {
    const auto one_btc = TokenAmount::parse("1", 8);
    CHECK(one_btc.units == 100000000);
    CHECK(value_of(one_btc, 8, Usd::parse("60000")) == Usd::parse("60000"));
    CHECK(value_of(TokenAmount::parse("0.5", 18), 18, Usd::parse("2538")) == Usd::parse("1269"));
    // floor: never more than the budget
    const auto q = quantity_for(Usd::parse("100"), 18, Usd::parse("3"));
    CHECK(value_of(q, 18, Usd::parse("3")) <= Usd::parse("100"));
    CHECK(q.units == detail::pow10(20) / 3);
  }
}
