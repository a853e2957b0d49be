#include "risksim/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "risksim/errors.hpp"

namespace risksim::io {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict reader collecting every problem with its JSON pointer.

class Reader {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& where, const std::string& what) { problems.push_back(where + ": " + what); }

  void only(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) return;
    for (const auto& [key, _] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(where + "/" + key, "unknown field");
    }
  }

  const json* field(const json& obj, const std::string& key, const std::string& where, bool required) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(where + "/" + key, "missing required field");
      return nullptr;
    }
    return &*it;
  }

  const json* object(const json& obj, const std::string& key, const std::string& where, bool required) {
    const json* f = field(obj, key, where, required);
    if (f && !f->is_object()) {
      fail(where + "/" + key, "expected an object");
      return nullptr;
    }
    return f;
  }

  const json* array(const json& obj, const std::string& key, const std::string& where, bool required) {
    const json* f = field(obj, key, where, required);
    if (f && !f->is_array()) {
      fail(where + "/" + key, "expected an array");
      return nullptr;
    }
    return f;
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& where, bool required) {
    const json* f = field(obj, key, where, required);
    if (!f) return std::nullopt;
    if (!f->is_number()) {
      fail(where + "/" + key, "expected a number");
      return std::nullopt;
    }
    return f->get<double>();
  }

  template <typename Int>
  std::optional<Int> integer(const json& obj, const std::string& key, const std::string& where, bool required) {
    const json* f = field(obj, key, where, required);
    if (!f) return std::nullopt;
    if (!f->is_number_integer()) {
      fail(where + "/" + key, "expected an integer");
      return std::nullopt;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (f->is_number_unsigned()) return Int(f->get<std::uint64_t>());
      const auto v = f->get<std::int64_t>();
      if (v < 0) {
        fail(where + "/" + key, "must be >= 0");
        return std::nullopt;
      }
      return Int(v);
    } else {
      return Int(f->get<std::int64_t>());
    }
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& where,
                                     bool required) {
    const json* f = field(obj, key, where, required);
    if (!f) return std::nullopt;
    if (!f->is_string()) {
      fail(where + "/" + key, "expected a string");
      return std::nullopt;
    }
    return f->get<std::string>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& where, bool required) {
    const json* f = field(obj, key, where, required);
    if (!f) return std::nullopt;
    if (!f->is_boolean()) {
      fail(where + "/" + key, "expected true or false");
      return std::nullopt;
    }
    return f->get<bool>();
  }

  /// Decimal given as a JSON number or as exact decimal text.
  template <typename Parse>
  auto decimal_value(const json& v, const std::string& where, Parse parse) -> std::optional<decltype(parse(""))> {
    try {
      if (v.is_string()) return parse(v.get<std::string>());
      if (v.is_number_integer()) return parse(v.dump());
      if (v.is_number()) {
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v.get<double>());
        (void)ec;
        return parse(std::string(buf, ptr));
      }
      fail(where, "expected a number or decimal string");
    } catch (const DomainError& e) {
      fail(where, e.what());
    }
    return std::nullopt;
  }

  template <typename D>
  std::optional<D> decimal(const json& obj, const std::string& key, const std::string& where, bool required) {
    const json* f = field(obj, key, where, required);
    if (!f) return std::nullopt;
    return decimal_value(*f, where + "/" + key, [](const std::string& s) { return D::parse(s); });
  }

  std::vector<double> numbers(const json& obj, const std::string& key, const std::string& where) {
    std::vector<double> out;
    const json* f = array(obj, key, where, false);
    if (!f) return out;
    for (std::size_t i = 0; i < f->size(); ++i) {
      if (!(*f)[i].is_number()) {
        fail(where + "/" + key + "/" + std::to_string(i), "expected a number");
        continue;
      }
      out.push_back((*f)[i].get<double>());
    }
    return out;
  }

  void throw_if_any() {
    if (!problems.empty()) throw ValidationError(std::move(problems));
  }
};

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line:column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string msg = e.what();
    if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ValidationError({origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg});
  }
}

void check_schema(Reader& r, const json& doc, const std::string& where) {
  if (auto v = r.integer<int>(doc, "schema_version", where, true); v && *v != kSchemaVersion) {
    r.fail(where + "/schema_version", "unsupported schema version " + std::to_string(*v));
  }
}

market::IRParams read_ir(Reader& r, const json& obj, const std::string& where) {
  r.only(obj, {"base", "slope_low", "slope_high", "kink"}, where);
  market::IRParams ir;
  ir.base = r.decimal<Ratio>(obj, "base", where, true).value_or(Ratio{});
  ir.slope_low = r.decimal<Ratio>(obj, "slope_low", where, true).value_or(Ratio{});
  ir.slope_high = r.decimal<Ratio>(obj, "slope_high", where, true).value_or(Ratio{});
  ir.kink = r.decimal<Ratio>(obj, "kink", where, true).value_or(Ratio{});
  return ir;
}

price::GarchSpec read_garch(Reader& r, const json& obj, const std::string& where) {
  r.only(obj, {"mu", "ar", "ma", "alpha0", "alpha", "beta"}, where);
  price::GarchSpec s;
  s.mu = r.number(obj, "mu", where, false).value_or(0.0);
  s.ar = r.numbers(obj, "ar", where);
  s.ma = r.numbers(obj, "ma", where);
  s.alpha0 = r.number(obj, "alpha0", where, true).value_or(0.0);
  s.alpha = r.numbers(obj, "alpha", where);
  s.beta = r.numbers(obj, "beta", where);
  try {
    s.validate();
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) r.fail(where, p);
  }
  return s;
}

std::string canonical_dump(const json& doc) { return doc.dump(); }

// ---------------------------------------------------------------------------
// Report serialization

json usd(Usd v) { return v.to_string(); }

Usd usd_from(const json& v) { return Usd::parse(v.get<std::string>()); }

json var_to_json(const engine::VarReport& v) {
  json rounds = json::array();
  for (const auto& r : v.rounds) {
    rounds.push_back({{"round", r.round},
                      {"n_samples", r.n_samples},
                      {"percentile", usd(r.percentile)},
                      {"gap", r.gap ? usd(*r.gap) : json(nullptr)},
                      {"within_epsilon", r.within_epsilon}});
  }
  return {{"var95", usd(v.var95)},
          {"converged", v.converged},
          {"epsilon", std::isinf(v.epsilon) ? json("inf") : json(v.epsilon)},
          {"n_samples", v.n_samples},
          {"rounds", rounds}};
}

engine::VarReport var_from_json(const json& j) {
  engine::VarReport v;
  v.var95 = usd_from(j.at("var95"));
  v.converged = j.at("converged").get<bool>();
  const auto& eps = j.at("epsilon");
  v.epsilon = eps.is_string() ? std::numeric_limits<double>::infinity() : eps.get<double>();
  v.n_samples = j.at("n_samples").get<std::size_t>();
  for (const auto& r : j.at("rounds")) {
    engine::VarRound round;
    round.round = r.at("round").get<std::size_t>();
    round.n_samples = r.at("n_samples").get<std::size_t>();
    round.percentile = usd_from(r.at("percentile"));
    if (!r.at("gap").is_null()) round.gap = usd_from(r.at("gap"));
    round.within_epsilon = r.at("within_epsilon").get<bool>();
    v.rounds.push_back(round);
  }
  return v;
}

json lar_to_json(const engine::LarReport& lar) {
  json cols = json::array();
  for (const auto& c : lar.columns) {
    cols.push_back({{"name", c.name},
                    {"p50", usd(c.p50)},
                    {"p90", usd(c.p90)},
                    {"p95", usd(c.p95)},
                    {"p99", usd(c.p99)},
                    {"histogram", {{"upper", usd(c.histogram.upper)}, {"counts", c.histogram.counts}}}});
  }
  return {{"columns", cols}};
}

engine::LarReport lar_from_json(const json& j) {
  engine::LarReport lar;
  for (const auto& c : j.at("columns")) {
    engine::LarColumn col;
    col.name = c.at("name").get<std::string>();
    col.p50 = usd_from(c.at("p50"));
    col.p90 = usd_from(c.at("p90"));
    col.p95 = usd_from(c.at("p95"));
    col.p99 = usd_from(c.at("p99"));
    col.histogram.upper = usd_from(c.at("histogram").at("upper"));
    col.histogram.counts = c.at("histogram").at("counts").get<std::vector<std::uint64_t>>();
    lar.columns.push_back(std::move(col));
  }
  return lar;
}

std::string fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

engine::Tolerance parse_tolerance(const std::string& text) {
  if (text == "inf" || text == "infinity") return engine::Tolerance::absolute(std::numeric_limits<double>::infinity());
  try {
    std::size_t used = 0;
    if (!text.empty() && text.back() == '%') {
      const double v = std::stod(text.substr(0, text.size() - 1), &used);
      if (used != text.size() - 1 || !(v > 0.0)) throw std::invalid_argument(text);
      return engine::Tolerance::relative(v / 100.0);
    }
    const double v = std::stod(text, &used);
    if (used != text.size() || v < 0.0) throw std::invalid_argument(text);
    return engine::Tolerance::absolute(v);
  } catch (const std::exception&) {
    throw ConfigError("invalid tolerance '" + text + "' (expected e.g. 250, 1% or inf)");
  }
}

ConfigFile parse_config(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  Reader r;
  ConfigFile cfg;
  cfg.canonical = canonical_dump(doc);
  if (!doc.is_object()) throw ValidationError({origin + ": expected a JSON object"});

  r.only(doc, {"schema_version", "market", "price_model", "slippage", "liquidator", "borrower_filter", "scenario"}, "");
  check_schema(r, doc, "");

  // market
  if (const json* m = r.object(doc, "market", "", true)) {
    const std::string w = "/market";
    r.only(*m, {"base_asset", "storefront_price_factor", "target_reserve", "supply_rate", "borrow_rate", "collaterals"},
           w);
    if (const json* b = r.object(*m, "base_asset", w, true)) {
      r.only(*b, {"symbol", "decimals"}, w + "/base_asset");
      cfg.market.base_asset.symbol = r.string(*b, "symbol", w + "/base_asset", true).value_or("");
      cfg.market.base_asset.decimals = r.integer<int>(*b, "decimals", w + "/base_asset", true).value_or(6);
    }
    cfg.market.sfp = r.decimal<Ratio>(*m, "storefront_price_factor", w, true).value_or(Ratio{});
    cfg.market.target_reserve = r.decimal<Usd>(*m, "target_reserve", w, true).value_or(Usd{});
    if (const json* s = r.object(*m, "supply_rate", w, true)) cfg.market.supply_ir = read_ir(r, *s, w + "/supply_rate");
    if (const json* s = r.object(*m, "borrow_rate", w, true)) cfg.market.borrow_ir = read_ir(r, *s, w + "/borrow_rate");
    if (const json* cs = r.array(*m, "collaterals", w, true)) {
      for (std::size_t i = 0; i < cs->size(); ++i) {
        const json& c = (*cs)[i];
        const std::string cw = w + "/collaterals/" + std::to_string(i);
        if (!c.is_object()) {
          r.fail(cw, "expected an object");
          continue;
        }
        r.only(c,
               {"symbol", "decimals", "borrow_collateral_factor", "liquidation_collateral_factor", "liquidation_factor",
                "supply_cap"},
               cw);
        market::CollateralConfig cc;
        cc.asset.symbol = r.string(c, "symbol", cw, true).value_or("");
        cc.asset.decimals = r.integer<int>(c, "decimals", cw, true).value_or(18);
        cc.bcf = r.decimal<Ratio>(c, "borrow_collateral_factor", cw, true).value_or(Ratio{});
        cc.lcf = r.decimal<Ratio>(c, "liquidation_collateral_factor", cw, true).value_or(Ratio{});
        cc.lf = r.decimal<Ratio>(c, "liquidation_factor", cw, true).value_or(Ratio{});
        const int dec = std::clamp(cc.asset.decimals, 0, 18);
        if (const json* cap = r.field(c, "supply_cap", cw, true)) {
          cc.supply_cap = r.decimal_value(*cap, cw + "/supply_cap", [dec](const std::string& s) {
                             return TokenAmount::parse(s, dec);
                           }).value_or(TokenAmount{});
        }
        cfg.market.collaterals.push_back(cc);
      }
    }
    try {
      cfg.market.validate();
    } catch (const ValidationError& e) {
      for (const auto& p : e.problems()) r.fail(w, p);
    }
  }

  std::vector<std::string> symbols;
  for (const auto& c : cfg.market.collaterals) symbols.push_back(c.asset.symbol);
  const std::size_t n = symbols.size();

  // price model
  if (const json* pm = r.object(doc, "price_model", "", true)) {
    const std::string w = "/price_model";
    r.only(*pm, {"garch", "correlation"}, w);
    cfg.garch.assign(n, price::GarchSpec{});
    if (const json* g = r.object(*pm, "garch", w, true)) {
      for (const auto& [key, _] : g->items()) {
        if (std::find(symbols.begin(), symbols.end(), key) == symbols.end())
          r.fail(w + "/garch/" + key, "asset is not a configured collateral");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (const json* spec = r.object(*g, symbols[i], w + "/garch", true))
          cfg.garch[i] = read_garch(r, *spec, w + "/garch/" + symbols[i]);
      }
    }
    if (const json* c = r.array(*pm, "correlation", w, false)) {
      std::vector<std::vector<double>> rows;
      bool shape_ok = c->size() == n;
      for (const auto& row : *c) {
        if (!row.is_array() || row.size() != n) {
          shape_ok = false;
          break;
        }
        std::vector<double> vals;
        for (const auto& v : row) {
          if (!v.is_number()) {
            shape_ok = false;
            break;
          }
          vals.push_back(v.get<double>());
        }
        rows.push_back(vals);
      }
      if (!shape_ok) {
        r.fail(w + "/correlation", "expected a " + std::to_string(n) + "x" + std::to_string(n) + " numeric matrix");
      } else {
        cfg.correlation = price::Matrix::from_rows(rows);
        try {
          price::psd_factor(cfg.correlation);
        } catch (const ValidationError& e) {
          for (const auto& p : e.problems()) r.fail(w + "/correlation", p);
        }
      }
    } else {
      cfg.correlation = price::Matrix::identity(n);
    }
  }

  // slippage
  slippage::Unit unit = slippage::Unit::percent;
  std::map<std::string, slippage::SlippageModel> models;
  if (const json* s = r.object(doc, "slippage", "", false)) {
    const std::string w = "/slippage";
    r.only(*s, {"unit", "models"}, w);
    if (auto u = r.string(*s, "unit", w, false)) {
      if (*u == "percent") {
        unit = slippage::Unit::percent;
      } else if (*u == "fraction") {
        unit = slippage::Unit::fraction;
      } else {
        r.fail(w + "/unit", "expected \"percent\" or \"fraction\"");
      }
    }
    if (const json* ms = r.object(*s, "models", w, false)) {
      for (const auto& [key, m] : ms->items()) {
        const std::string mw = w + "/models/" + key;
        if (std::find(symbols.begin(), symbols.end(), key) == symbols.end())
          r.fail(mw, "asset is not a configured collateral");
        r.only(m, {"form", "intercept", "coefficient"}, mw);
        slippage::SlippageModel model;
        model.asset = key;
        try {
          model.form = slippage::form_from_string(r.string(m, "form", mw, true).value_or("log_linear"));
        } catch (const ConfigError& e) {
          r.fail(mw + "/form", e.what());
        }
        model.intercept = r.number(m, "intercept", mw, true).value_or(0.0);
        model.coefficient = r.number(m, "coefficient", mw, true).value_or(0.0);
        models[key] = model;
      }
    }
  }
  for (const auto& sym : symbols) {
    auto it = models.find(sym);
    if (it != models.end()) {
      it->second.unit = unit;
      cfg.slippage.push_back(it->second);
      continue;
    }
    try {
      cfg.slippage.push_back(slippage::default_model(sym));
    } catch (const ConfigError&) {
      r.fail("/slippage/models/" + sym, "no slippage model and no published default for this asset");
    }
  }

  // liquidator
  if (const json* l = r.object(doc, "liquidator", "", false)) {
    const std::string w = "/liquidator";
    r.only(*l, {"trading_fee", "max_lot_usd", "min_lot_usd", "fee_in_threshold"}, w);
    if (auto v = r.decimal<Ratio>(*l, "trading_fee", w, false)) cfg.liquidator.trading_fee = *v;
    if (auto v = r.decimal<Usd>(*l, "max_lot_usd", w, false)) cfg.liquidator.max_lot_usd = *v;
    if (auto v = r.decimal<Usd>(*l, "min_lot_usd", w, false)) cfg.liquidator.min_lot_usd = *v;
    if (auto v = r.boolean(*l, "fee_in_threshold", w, false)) cfg.liquidator.fee_in_threshold = *v;
    if (cfg.liquidator.trading_fee < Ratio::zero() || cfg.liquidator.trading_fee >= Ratio::one())
      r.fail(w + "/trading_fee", "must be in [0, 1)");
    if (cfg.liquidator.max_lot_usd <= Usd::zero()) r.fail(w + "/max_lot_usd", "must be > 0");
    if (cfg.liquidator.min_lot_usd < Usd::zero()) r.fail(w + "/min_lot_usd", "must be >= 0");
  }

  // borrower filter
  if (const json* b = r.object(doc, "borrower_filter", "", false)) {
    const std::string w = "/borrower_filter";
    r.only(*b, {"min_borrow_usd", "max_health_factor"}, w);
    if (auto v = r.decimal<Usd>(*b, "min_borrow_usd", w, false)) cfg.borrower_filter.min_borrow_usd = *v;
    if (auto v = r.decimal<Ratio>(*b, "max_health_factor", w, false)) cfg.borrower_filter.max_health_factor = *v;
    if (cfg.borrower_filter.min_borrow_usd < Usd::zero()) r.fail(w + "/min_borrow_usd", "must be >= 0");
    if (cfg.borrower_filter.max_health_factor <= Ratio::zero()) r.fail(w + "/max_health_factor", "must be > 0");
  }

  // scenario
  if (const json* s = r.object(doc, "scenario", "", false)) {
    const std::string w = "/scenario";
    r.only(*s,
           {"horizon_steps", "step_seconds", "paths_per_round", "rounds", "max_rounds", "epsilon", "seed", "lar_bins"},
           w);
    auto& sc = cfg.scenario;
    if (auto v = r.integer<std::int64_t>(*s, "horizon_steps", w, false)) sc.horizon_steps = *v;
    if (auto v = r.integer<std::int64_t>(*s, "step_seconds", w, false)) sc.step_seconds = *v;
    if (auto v = r.integer<std::size_t>(*s, "paths_per_round", w, false)) sc.paths_per_round = *v;
    if (auto v = r.integer<std::size_t>(*s, "rounds", w, false)) sc.rounds = *v;
    if (auto v = r.integer<std::size_t>(*s, "max_rounds", w, false)) sc.max_rounds = *v;
    if (auto v = r.integer<std::uint64_t>(*s, "seed", w, false)) sc.seed = *v;
    if (auto v = r.integer<std::size_t>(*s, "lar_bins", w, false)) sc.lar_bins = *v;
    if (const json* e = r.field(*s, "epsilon", w, false)) {
      try {
        sc.tolerance = e->is_string() ? parse_tolerance(e->get<std::string>())
                                      : engine::Tolerance::absolute(e->get<double>());
      } catch (const std::exception& ex) {
        r.fail(w + "/epsilon", ex.what());
      }
    }
    if (sc.horizon_steps < 1) r.fail(w + "/horizon_steps", "must be >= 1");
    if (sc.step_seconds < 1) r.fail(w + "/step_seconds", "must be >= 1");
    if (sc.paths_per_round < 1) r.fail(w + "/paths_per_round", "must be >= 1");
    if (sc.rounds < 1) r.fail(w + "/rounds", "must be >= 1");
    if (sc.max_rounds < 3) r.fail(w + "/max_rounds", "must be >= 3");
    if (sc.lar_bins < 1) r.fail(w + "/lar_bins", "must be >= 1");
  }

  for (auto& p : r.problems) p = origin + ":" + p;
  r.throw_if_any();
  return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) { return parse_config(read_text(path), path.string()); }

SnapshotFile parse_snapshot(const std::string& text, const ConfigFile& config, const std::string& origin) {
  const json doc = parse_json(text, origin);
  if (!doc.is_object()) throw ValidationError({origin + ": expected a JSON object"});
  Reader r;
  SnapshotFile snap;
  snap.canonical = canonical_dump(doc);
  const auto& params = config.market;

  r.only(doc, {"schema_version", "block_height", "prices", "base_reserve", "accounts", "suppliers"}, "");
  check_schema(r, doc, "");
  snap.block_height = r.integer<std::int64_t>(doc, "block_height", "", true).value_or(0);
  snap.base_reserve = r.decimal<Usd>(doc, "base_reserve", "", false).value_or(Usd{});

  auto known = [&](const std::string& symbol) {
    for (const auto& c : params.collaterals)
      if (c.asset.symbol == symbol) return true;
    return false;
  };

  if (const json* p = r.object(doc, "prices", "", true)) {
    for (const auto& [symbol, v] : p->items()) {
      const std::string w = "/prices/" + symbol;
      if (!known(symbol) && symbol != params.base_asset.symbol) {
        r.fail(w, "asset is not in the market config");
        continue;
      }
      if (auto price = r.decimal_value(v, w, [](const std::string& s) { return Usd::parse(s); })) {
        if (*price <= Usd::zero()) {
          r.fail(w, "price must be positive");
        } else {
          snap.prices[symbol] = *price;
        }
      }
    }
    for (const auto& c : params.collaterals)
      if (!snap.prices.count(c.asset.symbol)) r.fail("/prices/" + c.asset.symbol, "missing price");
  }

  std::set<std::string> ids;
  if (const json* accounts = r.array(doc, "accounts", "", true)) {
    for (std::size_t i = 0; i < accounts->size(); ++i) {
      const json& a = (*accounts)[i];
      const std::string w = "/accounts/" + std::to_string(i);
      if (!a.is_object()) {
        r.fail(w, "expected an object");
        continue;
      }
      r.only(a, {"id", "collateral", "base_borrowed", "base_supplied"}, w);
      market::Account acct;
      acct.id = r.string(a, "id", w, true).value_or("");
      const std::string label = w + " (account '" + acct.id + "')";
      if (!acct.id.empty() && !ids.insert(acct.id).second) r.fail(label, "duplicate account id");
      acct.collateral.assign(params.collaterals.size(), TokenAmount{});
      if (const json* col = r.object(a, "collateral", w, true)) {
        for (const auto& [symbol, q] : col->items()) {
          const std::string cw = label + "/collateral/" + symbol;
          if (!known(symbol)) {
            r.fail(cw, "collateral asset is not in the market config");
            continue;
          }
          const std::size_t idx = params.index_of(symbol);
          const int dec = params.collaterals[idx].asset.decimals;
          if (auto qty = r.decimal_value(q, cw, [dec](const std::string& s) { return TokenAmount::parse(s, dec); })) {
            if (qty->units < 0) {
              r.fail(cw, "negative collateral quantity");
            } else {
              acct.collateral[idx] = *qty;
            }
          }
        }
      }
      acct.base_borrowed = r.decimal<Usd>(a, "base_borrowed", w, false).value_or(Usd{});
      acct.base_supplied = r.decimal<Usd>(a, "base_supplied", w, false).value_or(Usd{});
      if (acct.base_borrowed < Usd::zero()) r.fail(label + "/base_borrowed", "must be >= 0");
      if (acct.base_supplied < Usd::zero()) r.fail(label + "/base_supplied", "must be >= 0");
      if (acct.base_borrowed > Usd::zero() && acct.base_supplied > Usd::zero())
        r.fail(label, "cannot both borrow and supply base");
      snap.accounts.push_back(std::move(acct));
    }
  }

  if (const json* suppliers = r.array(doc, "suppliers", "", true)) {
    for (std::size_t i = 0; i < suppliers->size(); ++i) {
      const json& s = (*suppliers)[i];
      const std::string w = "/suppliers/" + std::to_string(i);
      r.only(s, {"id", "amount"}, w);
      agents::SupplierRow row;
      row.id = r.string(s, "id", w, true).value_or("");
      row.amount = r.decimal<Usd>(s, "amount", w, true).value_or(Usd{});
      if (row.amount < Usd::zero()) r.fail(w + "/amount", "must be >= 0");
      snap.suppliers.push_back(row);
    }
  }

  // Supply caps over every posted position.
  for (std::size_t i = 0; i < params.collaterals.size(); ++i) {
    TokenAmount posted;
    for (const auto& a : snap.accounts) posted += a.collateral[i];
    if (posted > params.collaterals[i].supply_cap)
      r.fail("/accounts", "posted " + params.collaterals[i].asset.symbol + " exceeds its supply cap");
  }
  Usd supplied, borrowed;
  for (const auto& s : snap.suppliers) supplied += s.amount;
  for (const auto& a : snap.accounts) {
    supplied += a.base_supplied;
    borrowed += a.base_borrowed;
  }
  if (borrowed > supplied + snap.base_reserve)
    r.fail("", "total borrowed exceeds supplied liquidity plus reserves");

  for (auto& p : r.problems) p = origin + ":" + p;
  r.throw_if_any();
  return snap;
}

SnapshotFile load_snapshot(const std::filesystem::path& path, const ConfigFile& config) {
  return parse_snapshot(read_text(path), config, path.string());
}

engine::Scenario build_scenario(const ConfigFile& config, const SnapshotFile& snapshot,
                                std::optional<std::uint64_t> seed) {
  auto params = std::make_shared<const market::MarketParams>(config.market);
  engine::Scenario sc;
  sc.params = params;
  sc.origin_prices = market::PriceVector::from_map(*params, snapshot.prices);

  const auto ledger = agents::init_supplier_liquidity(snapshot.suppliers);
  market::MarketState state(params);
  state.total_base_supplied = ledger.total;
  for (const auto& a : snapshot.accounts) {
    state.total_base_supplied += a.base_supplied;
    state.total_base_borrowed += a.base_borrowed;
  }
  state.base_reserve = snapshot.base_reserve;
  for (auto& a : agents::init_borrowers(snapshot.accounts, sc.origin_prices, *params, config.borrower_filter)) {
    state.add_account(std::move(a));
  }
  sc.initial_state = std::move(state);
  sc.garch = config.garch;
  sc.correlation = config.correlation;
  sc.slippage = config.slippage;
  sc.liquidator = config.liquidator;
  sc.horizon_steps = config.scenario.horizon_steps;
  sc.step_seconds = config.scenario.step_seconds;
  sc.master_seed = seed.value_or(config.scenario.seed);
  sc.validate();
  return sc;
}

std::string fingerprint(const ConfigFile& config, const SnapshotFile& snapshot, std::uint64_t seed) {
  return fnv1a64(config.canonical + "\n" + snapshot.canonical + "\n" + std::to_string(seed));
}

std::string report_to_json(const engine::RiskReport& report) {
  json diag = json::array();
  for (const auto& d : report.diagnostics) {
    diag.push_back({{"round", d.round},
                    {"paths", d.paths},
                    {"mean_loss", usd(d.mean_loss)},
                    {"max_loss", usd(d.max_loss)},
                    {"absorbs", d.absorbs},
                    {"sales", d.sales},
                    {"paths_with_loss", d.paths_with_loss},
                    {"bad_debt", usd(d.bad_debt)}});
  }
  json env = json::array();
  for (const auto& e : report.envelope) {
    env.push_back({{"asset", e.asset}, {"max_drop_pct", e.max_drop_pct}, {"max_rise_pct", e.max_rise_pct}});
  }
  const json doc{{"schema_version", kSchemaVersion},
                 {"fingerprint", report.fingerprint},
                 {"seed", report.seed},
                 {"var", var_to_json(report.var)},
                 {"lar", lar_to_json(report.lar)},
                 {"diagnostics", diag},
                 {"price_envelope", env}};
  return doc.dump(2) + "\n";
}

engine::RiskReport report_from_json(const std::string& text) {
  const json doc = parse_json(text, "<report>");
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion) throw ValidationError({"unsupported report schema"});
    engine::RiskReport r;
    r.fingerprint = doc.at("fingerprint").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.var = var_from_json(doc.at("var"));
    r.lar = lar_from_json(doc.at("lar"));
    for (const auto& d : doc.at("diagnostics")) {
      engine::RoundDiagnostics rd;
      rd.round = d.at("round").get<std::size_t>();
      rd.paths = d.at("paths").get<std::size_t>();
      rd.mean_loss = usd_from(d.at("mean_loss"));
      rd.max_loss = usd_from(d.at("max_loss"));
      rd.absorbs = d.at("absorbs").get<std::uint64_t>();
      rd.sales = d.at("sales").get<std::uint64_t>();
      rd.paths_with_loss = d.at("paths_with_loss").get<std::uint64_t>();
      rd.bad_debt = usd_from(d.at("bad_debt"));
      r.diagnostics.push_back(rd);
    }
    for (const auto& e : doc.at("price_envelope")) {
      r.envelope.push_back({e.at("asset").get<std::string>(), e.at("max_drop_pct").get<double>(),
                            e.at("max_rise_pct").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError({std::string("malformed report: ") + e.what()});
  }
}

void write_report(const engine::RiskReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::json) {
    write_text(path, report_to_json(report));
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw Error("cannot create '" + path.string() + "': " + ec.message());

  std::ostringstream var;
  var << "round,n_samples,p95,gap,within_epsilon\n";
  for (const auto& r : report.var.rounds) {
    var << r.round << ',' << r.n_samples << ',' << r.percentile.to_string() << ','
        << (r.gap ? r.gap->to_string() : "") << ',' << (r.within_epsilon ? "true" : "false") << '\n';
  }
  write_text(path / "var.csv", var.str());

  std::ostringstream summary;
  summary << "fingerprint,seed,var95,converged,epsilon,n_samples\n"
          << report.fingerprint << ',' << report.seed << ',' << report.var.var95.to_string() << ','
          << (report.var.converged ? "true" : "false") << ','
          << (std::isinf(report.var.epsilon) ? "inf" : fmt_double(report.var.epsilon)) << ','
          << report.var.n_samples << '\n';
  write_text(path / "summary.csv", summary.str());

  std::ostringstream pct;
  pct << "column,p50,p90,p95,p99\n";
  for (const auto& c : report.lar.columns) {
    pct << c.name << ',' << c.p50.to_string() << ',' << c.p90.to_string() << ',' << c.p95.to_string() << ','
        << c.p99.to_string() << '\n';
  }
  write_text(path / "lar_percentiles.csv", pct.str());

  for (const auto& c : report.lar.columns) {
    std::ostringstream h;
    h << "bin,lower,upper,count\n";
    const std::size_t bins = c.histogram.counts.size();
    for (std::size_t b = 0; b < bins; ++b) {
      const auto edge = [&](std::size_t k) {
        return Usd::from_raw(detail::div_half_even(c.histogram.upper.raw() * int128(k), int128(bins)));
      };
      h << b << ',' << edge(b).to_string() << ',' << edge(b + 1).to_string() << ',' << c.histogram.counts[b] << '\n';
    }
    write_text(path / ("lar_histogram_" + c.name + ".csv"), h.str());
  }

  std::ostringstream diag;
  diag << "round,paths,mean_loss,max_loss,absorbs,sales,paths_with_loss,bad_debt\n";
  for (const auto& d : report.diagnostics) {
    diag << d.round << ',' << d.paths << ',' << d.mean_loss.to_string() << ',' << d.max_loss.to_string() << ','
         << d.absorbs << ',' << d.sales << ',' << d.paths_with_loss << ',' << d.bad_debt.to_string() << '\n';
  }
  write_text(path / "diagnostics.csv", diag.str());

  std::ostringstream env;
  env << "asset,max_drop_pct,max_rise_pct\n";
  for (const auto& e : report.envelope) {
    env << e.asset << ',' << fmt_double(e.max_drop_pct) << ',' << fmt_double(e.max_rise_pct) << '\n';
  }
  write_text(path / "price_envelope.csv", env.str());
}

engine::RiskReport read_report(const std::filesystem::path& path) { return report_from_json(read_text(path)); }

std::vector<double> load_price_series(const std::filesystem::path& path, const std::string& asset) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError({path.string() + ": empty file"});
  const auto header = split_csv_line(line);
  if (header != std::vector<std::string>{"timestamp", "asset", "price"}) {
    throw ValidationError({path.string() + ":1: expected header 'timestamp,asset,price'"});
  }
  std::vector<std::string> problems;
  std::vector<std::pair<std::int64_t, double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) {
      problems.push_back(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
      continue;
    }
    if (cells[1] != asset) continue;
    try {
      std::size_t used = 0;
      const std::int64_t ts = std::stoll(cells[0], &used);
      const double price = std::stod(cells[2]);
      if (!(price > 0.0)) throw std::invalid_argument("price");
      rows.emplace_back(ts, price);
    } catch (const std::exception&) {
      problems.push_back(path.string() + ":" + std::to_string(lineno) + ": invalid timestamp or price");
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> prices;
  for (const auto& [_, p] : rows) prices.push_back(p);
  if (prices.empty()) throw ValidationError({path.string() + ": no prices for asset '" + asset + "'"});
  return prices;
}

std::vector<slippage::SlippageSample> load_slippage_samples(const std::filesystem::path& path,
                                                            const std::string& asset) {
  const json doc = parse_json(read_text(path), path.string());
  const json* rows = &doc;
  if (doc.is_object()) {
    auto it = doc.find(asset);
    if (it == doc.end()) throw ValidationError({path.string() + ": no samples for asset '" + asset + "'"});
    rows = &*it;
  }
  if (!rows->is_array()) throw ValidationError({path.string() + ": expected an array of samples"});
  Reader r;
  std::vector<slippage::SlippageSample> out;
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const json& s = (*rows)[i];
    const std::string w = "/" + std::to_string(i);
    r.only(s, {"sell", "slippagePercent"}, w);
    const auto sell = r.number(s, "sell", w, true);
    const auto slip = r.number(s, "slippagePercent", w, true);
    if (sell && !(*sell > 0.0)) r.fail(w + "/sell", "must be > 0");
    if (sell && slip) out.push_back({*sell, *slip});
  }
  for (auto& p : r.problems) p = path.string() + ":" + p;
  r.throw_if_any();
  return out;
}

}  // namespace risksim::io
