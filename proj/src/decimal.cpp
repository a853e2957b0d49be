#include "risksim/decimal.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "risksim/errors.hpp"

namespace risksim::detail {

std::string int128_to_string(int128 v) {
  if (v == 0) return "0";
  const bool negative = v < 0;
  uint128 u = negative ? uint128(-v) : uint128(v);
  std::string out;
  while (u != 0) {
    out.insert(out.begin(), char('0' + int(u % 10)));
    u /= 10;
  }
  if (negative) out.insert(out.begin(), '-');
  return out;
}

std::string format_scaled(int128 raw, int digits) {
  const bool negative = raw < 0;
  const uint128 u = negative ? uint128(-raw) : uint128(raw);
  const uint128 scale = uint128(pow10(digits));
  std::string whole = int128_to_string(int128(u / scale));
  std::string out = negative ? "-" + whole : whole;
  if (digits > 0) {
    std::string frac = int128_to_string(int128(u % scale));
    out += '.';
    out.append(std::size_t(digits) - frac.size(), '0');
    out += frac;
  }
  return out;
}

int128 parse_scaled(std::string_view text, int digits) {
  const std::string original(text);
  auto fail = [&] { throw DomainError("not a decimal number: '" + original + "'"); };
  if (text.empty()) fail();

  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }

  int exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    auto exp_text = text.substr(e + 1);
    if (!exp_text.empty() && exp_text.front() == '+') exp_text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exponent);
    if (ec != std::errc{} || ptr != exp_text.data() + exp_text.size()) fail();
    text = text.substr(0, e);
  }

  // Collect significant digits; `scale` counts digits after the decimal point.
  std::string mantissa;
  int scale = 0;
  bool seen_point = false;
  bool any_digit = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_point) fail();
      seen_point = true;
    } else if (c >= '0' && c <= '9') {
      any_digit = true;
      if (mantissa.empty() && c == '0') {
        if (seen_point) ++scale;
        continue;
      }
      mantissa += c;
      if (seen_point) ++scale;
    } else {
      fail();
    }
  }
  if (!any_digit) fail();
  if (mantissa.size() > 36) throw DomainError("decimal out of range: '" + original + "'");

  int128 m = 0;
  for (char c : mantissa) m = m * 10 + (c - '0');

  // value = m · 10^(exponent − scale); we want value · 10^digits.
  const int shift = digits + exponent - scale;
  int128 out;
  if (shift >= 0) {
    if (shift + int(mantissa.size()) > 37) throw DomainError("decimal out of range: '" + original + "'");
    out = m * pow10(shift);
  } else if (-shift > 37) {
    out = 0;
  } else {
    out = div_half_even(m, pow10(-shift));
  }
  return negative ? -out : out;
}

int128 scaled_from_double(double v, int digits) {
  if (!std::isfinite(v)) throw DomainError("non-finite number");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw DomainError("cannot format number");
  return parse_scaled(std::string_view(buf, std::size_t(ptr - buf)), digits);
}

}  // namespace risksim::detail
