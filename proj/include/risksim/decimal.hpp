#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace risksim {

using int128 = __int128;
using uint128 = unsigned __int128;

namespace detail {

constexpr int128 pow10(int n) {
  int128 r = 1;
  for (int i = 0; i < n; ++i) r *= 10;
  return r;
}

// Signed division rounding half to even.
constexpr int128 div_half_even(int128 num, int128 den) {
  const bool negative = (num < 0) != (den < 0);
  const uint128 n = num < 0 ? uint128(-num) : uint128(num);
  const uint128 d = den < 0 ? uint128(-den) : uint128(den);
  uint128 q = n / d;
  const uint128 r = n % d;
  const uint128 twice = r * 2;
  if (twice > d || (twice == d && (q & 1) != 0)) ++q;
  return negative ? -int128(q) : int128(q);
}

constexpr int128 div_floor(int128 num, int128 den) {
  int128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

std::string int128_to_string(int128 v);
int128 parse_scaled(std::string_view text, int digits);  // throws DomainError
std::string format_scaled(int128 raw, int digits);
int128 scaled_from_double(double v, int digits);

}  // namespace detail

/// Fixed-point decimal with `Digits` fractional digits backed by a 128-bit integer.
/// Every rescaling rounds half to even, so results are identical on every platform.
template <int Digits>
class Decimal {
  static_assert(Digits >= 0 && Digits <= 30);

 public:
  static constexpr int kDigits = Digits;
  static constexpr int128 kScale = detail::pow10(Digits);

  constexpr Decimal() = default;

  static constexpr Decimal from_raw(int128 raw) {
    Decimal d;
    d.raw_ = raw;
    return d;
  }
  static constexpr Decimal from_int(std::int64_t v) { return from_raw(int128(v) * kScale); }

  /// Exact decimal text, optional exponent ("1.5e-9"); excess digits round half to even.
  static Decimal parse(std::string_view text) { return from_raw(detail::parse_scaled(text, Digits)); }

  /// Goes through the shortest round-trip representation of `v`, so 0.92 is exactly 0.92.
  static Decimal from_double(double v) { return from_raw(detail::scaled_from_double(v, Digits)); }

  /// Direct scaling for hot paths. Exact only while |v|·10^Digits < 2^53.
  static Decimal from_double_fast(double v);

  constexpr int128 raw() const { return raw_; }
  double to_double() const { return double(raw_) / double(kScale); }
  std::string to_string() const { return detail::format_scaled(raw_, Digits); }

  constexpr Decimal operator-() const { return from_raw(-raw_); }
  constexpr Decimal& operator+=(Decimal o) {
    raw_ += o.raw_;
    return *this;
  }
  constexpr Decimal& operator-=(Decimal o) {
    raw_ -= o.raw_;
    return *this;
  }
  friend constexpr Decimal operator+(Decimal a, Decimal b) { return a += b; }
  friend constexpr Decimal operator-(Decimal a, Decimal b) { return a -= b; }
  friend constexpr auto operator<=>(Decimal, Decimal) = default;
  friend constexpr bool operator==(Decimal, Decimal) = default;

  static constexpr Decimal zero() { return Decimal{}; }
  static constexpr Decimal one() { return from_raw(kScale); }

 private:
  int128 raw_ = 0;
};

template <int Digits>
Decimal<Digits> Decimal<Digits>::from_double_fast(double v) {
  return from_raw(int128(__builtin_nearbyint(v * double(kScale))));
}

/// a·b rescaled to `R` digits.
template <int R, int A, int B>
constexpr Decimal<R> mul(Decimal<A> a, Decimal<B> b) {
  constexpr int shift = A + B - R;
  static_assert(shift >= 0);
  if constexpr (shift == 0) {
    return Decimal<R>::from_raw(a.raw() * b.raw());
  } else {
    return Decimal<R>::from_raw(detail::div_half_even(a.raw() * b.raw(), detail::pow10(shift)));
  }
}

/// a/b rescaled to `R` digits. Caller guarantees b != 0.
template <int R, int A, int B>
constexpr Decimal<R> div(Decimal<A> a, Decimal<B> b) {
  constexpr int shift = R + B - A;
  static_assert(shift >= 0);
  return Decimal<R>::from_raw(detail::div_half_even(a.raw() * detail::pow10(shift), b.raw()));
}

/// US dollars (and base-asset units, which are treated as USD-pegged), 8 fractional digits.
using Usd = Decimal<8>;
/// Dimensionless factors and per-second rates, 18 fractional digits.
using Ratio = Decimal<18>;

inline Usd operator*(Usd a, Ratio b) { return mul<8>(a, b); }
inline Usd operator*(Ratio a, Usd b) { return mul<8>(b, a); }
inline Ratio operator*(Ratio a, Ratio b) { return mul<18>(a, b); }

/// Token quantity in integer base units (10^-decimals of a whole token).
struct TokenAmount {
  int128 units = 0;

  friend constexpr auto operator<=>(TokenAmount, TokenAmount) = default;
  friend constexpr bool operator==(TokenAmount, TokenAmount) = default;
  constexpr TokenAmount& operator+=(TokenAmount o) {
    units += o.units;
    return *this;
  }
  constexpr TokenAmount& operator-=(TokenAmount o) {
    units -= o.units;
    return *this;
  }
  friend constexpr TokenAmount operator+(TokenAmount a, TokenAmount b) { return a += b; }
  friend constexpr TokenAmount operator-(TokenAmount a, TokenAmount b) { return a -= b; }

  /// Whole tokens given as exact decimal text, e.g. "1.5".
  static TokenAmount parse(std::string_view text, int decimals) {
    return {detail::parse_scaled(text, decimals)};
  }
  static TokenAmount from_double(double whole_tokens, int decimals) {
    return {detail::scaled_from_double(whole_tokens, decimals)};
  }
  std::string to_string(int decimals) const { return detail::format_scaled(units, decimals); }
  double to_double(int decimals) const { return double(units) / double(detail::pow10(decimals)); }
};

/// qty × unit price, in USD.
inline Usd value_of(TokenAmount qty, int decimals, Usd price) {
  return Usd::from_raw(detail::div_half_even(qty.units * price.raw(), detail::pow10(decimals)));
}

/// Largest quantity whose value at `price` does not exceed `budget`.
inline TokenAmount quantity_for(Usd budget, int decimals, Usd price) {
  return {detail::div_floor(budget.raw() * detail::pow10(decimals), price.raw())};
}

}  // namespace risksim
