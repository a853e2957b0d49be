#include "risksim/price_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "nelder_mead.hpp"
#include "risksim/rng.hpp"

namespace risksim::price {

namespace {

void push_front(std::vector<double>& lags, double value) {
  if (lags.empty()) return;
  for (std::size_t i = lags.size() - 1; i > 0; --i) lags[i] = lags[i - 1];
  lags[0] = value;
}

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

double variance_of(std::span<const double> xs, double mean) {
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / double(xs.size());
}

double autocorrelation(const std::vector<double>& xs, std::size_t lag) {
  const double m = mean_of(xs);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    den += (xs[t] - m) * (xs[t] - m);
    if (t >= lag) num += (xs[t] - m) * (xs[t - lag] - m);
  }
  return den > 0.0 ? num / den : 0.0;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kMaxPersistence = 0.9999;

// Unconstrained parameter vector layout:
// [mu, ar..., ma..., log alpha0, logit(persistence / kMaxPersistence), share logits (p + q - 1)]
struct Layout {
  int p, q, arma_p, arma_q;
  std::size_t size() const { return std::size_t(1 + arma_p + arma_q + 2 + (p + q - 1)); }

  GarchSpec decode(const std::vector<double>& x) const {
    GarchSpec s;
    std::size_t k = 0;
    s.mu = x[k++];
    for (int i = 0; i < arma_p; ++i) s.ar.push_back(std::tanh(x[k++]));
    for (int i = 0; i < arma_q; ++i) s.ma.push_back(std::tanh(x[k++]));
    s.alpha0 = std::exp(x[k++]);
    const double persistence = kMaxPersistence * logistic(x[k++]);
    std::vector<double> w(std::size_t(p + q), 1.0);
    for (int i = 1; i < p + q; ++i) w[std::size_t(i)] = std::exp(x[k++]);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (int i = 0; i < p; ++i) s.alpha.push_back(persistence * w[std::size_t(i)] / total);
    for (int j = 0; j < q; ++j) s.beta.push_back(persistence * w[std::size_t(p + j)] / total);
    return s;
  }

  std::vector<double> encode(double mu, double alpha0, const std::vector<double>& alpha,
                             const std::vector<double>& beta) const {
    std::vector<double> x;
    x.push_back(mu);
    for (int i = 0; i < arma_p + arma_q; ++i) x.push_back(0.0);
    x.push_back(std::log(alpha0));
    const double persistence = std::accumulate(alpha.begin(), alpha.end(), 0.0) +
                               std::accumulate(beta.begin(), beta.end(), 0.0);
    const double frac = std::clamp(persistence / kMaxPersistence, 1e-6, 1.0 - 1e-6);
    x.push_back(std::log(frac / (1.0 - frac)));
    std::vector<double> w = alpha;
    w.insert(w.end(), beta.begin(), beta.end());
    for (std::size_t i = 1; i < w.size(); ++i) x.push_back(std::log(std::max(w[i], 1e-8) / std::max(w[0], 1e-8)));
    return x;
  }
};

// Moment-based starting point for GARCH(1,1)-like dynamics from the
// autocorrelation of squared residuals: rho_k = rho_1 (alpha + beta)^(k-1).
void moment_start(const std::vector<double>& y, double mu, int p, int q, double& alpha0, std::vector<double>& alpha,
                  std::vector<double>& beta) {
  std::vector<double> sq(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) sq[t] = (y[t] - mu) * (y[t] - mu);
  const double var = mean_of(sq);
  const double rho1 = autocorrelation(sq, 1);
  const double rho2 = autocorrelation(sq, 2);
  const double significant = 2.0 / std::sqrt(double(y.size()));

  double a = 0.02, b = q > 0 ? 0.02 : 0.0;
  if (rho1 > significant && rho2 > 0.0) {
    const double phi = std::clamp(rho2 / rho1, 0.3, 0.99);
    const double bq = q > 0 ? 1.0 : 0.0;
    auto implied_rho1 = [&](double al) {
      const double be = bq * (phi - al);
      return al * (1.0 - al * be - be * be) / (1.0 - 2.0 * al * be - be * be);
    };
    double lo = 1e-6, hi = q > 0 ? phi - 1e-6 : phi;
    if (implied_rho1(lo) < rho1 && implied_rho1(hi) > rho1) {
      for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (implied_rho1(mid) < rho1 ? lo : hi) = mid;
      }
      a = 0.5 * (lo + hi);
    } else {
      a = std::min(0.1, phi);
    }
    b = q > 0 ? phi - a : 0.0;
  }
  alpha.assign(std::size_t(p), a / p);
  beta.assign(std::size_t(q), q > 0 ? b / q : 0.0);
  alpha0 = var * std::max(1e-4, 1.0 - a - b);
}

}  // namespace

double GarchSpec::persistence() const {
  return std::accumulate(alpha.begin(), alpha.end(), 0.0) + std::accumulate(beta.begin(), beta.end(), 0.0);
}

double GarchSpec::unconditional_variance() const { return alpha0 / (1.0 - persistence()); }

void GarchSpec::validate() const {
  std::vector<std::string> problems;
  if (!(alpha0 > 0.0)) problems.push_back("alpha0 must be > 0");
  if (alpha.empty()) problems.push_back("at least one ARCH coefficient is required");
  for (double a : alpha)
    if (!(a >= 0.0)) problems.push_back("ARCH coefficients must be >= 0");
  for (double b : beta)
    if (!(b >= 0.0)) problems.push_back("GARCH coefficients must be >= 0");
  if (!(persistence() < 1.0)) problems.push_back("sum of alpha and beta must be < 1");
  for (double c : ar)
    if (!std::isfinite(c)) problems.push_back("AR coefficients must be finite");
  for (double c : ma)
    if (!std::isfinite(c)) problems.push_back("MA coefficients must be finite");
  if (!std::isfinite(mu)) problems.push_back("mu must be finite");
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

GarchState initial_state(const GarchSpec& spec) {
  const double var = spec.unconditional_variance();
  double ar_sum = std::accumulate(spec.ar.begin(), spec.ar.end(), 0.0);
  const double mean = std::abs(1.0 - ar_sum) > 1e-12 ? spec.mu / (1.0 - ar_sum) : spec.mu;
  return GarchState{std::vector<double>(spec.ar.size(), mean),
                    std::vector<double>(std::max(spec.ma.size(), spec.alpha.size()), 0.0),
                    std::vector<double>(std::max(spec.alpha.size(), spec.beta.size()), var)};
}

StepResult garch_step(const GarchSpec& spec, GarchState& state, double z) {
  double variance = spec.alpha0;
  for (std::size_t i = 0; i < spec.alpha.size(); ++i) {
    const double e = i < state.innovations.size() ? state.innovations[i] : 0.0;
    variance += spec.alpha[i] * e * e;
  }
  for (std::size_t j = 0; j < spec.beta.size(); ++j) variance += spec.beta[j] * state.variances[j];

  const double innovation = std::sqrt(variance) * z;
  double r = spec.mu + innovation;
  for (std::size_t i = 0; i < spec.ar.size(); ++i) r += spec.ar[i] * state.returns[i];
  for (std::size_t j = 0; j < spec.ma.size(); ++j) r += spec.ma[j] * state.innovations[j];

  // The innovation buffer must be long enough for both the MA and ARCH lags.
  if (state.innovations.size() < std::max(spec.ma.size(), spec.alpha.size()))
    state.innovations.resize(std::max(spec.ma.size(), spec.alpha.size()), 0.0);
  push_front(state.returns, r);
  push_front(state.innovations, innovation);
  push_front(state.variances, variance);
  return {r, variance, innovation};
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw ValidationError({"matrix must be square"});
    for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::vector<std::vector<double>> Matrix::rows() const {
  std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
  for (std::size_t r = 0; r < n_; ++r)
    for (std::size_t c = 0; c < n_; ++c) out[r][c] = (*this)(r, c);
  return out;
}

std::vector<double> log_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw DomainError("log returns need at least two prices");
  for (double p : prices)
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("prices must be positive and finite");
  std::vector<double> out(prices.size() - 1);
  for (std::size_t t = 1; t < prices.size(); ++t) out[t - 1] = std::log(prices[t] / prices[t - 1]);
  return out;
}

double garch_log_likelihood(const GarchSpec& spec, std::span<const double> returns) {
  const double mean = mean_of(returns);
  const double presample_var = std::max(variance_of(returns, mean), 1e-300);

  std::vector<double> ret_lags(spec.ar.size(), mean);
  std::vector<double> eps_lags(std::max(spec.ma.size(), spec.alpha.size()), 0.0);
  std::vector<double> var_lags(spec.beta.size(), presample_var);
  std::vector<double> sq_lags(spec.alpha.size(), presample_var);

  constexpr double kLog2Pi = 1.8378770664093453;
  double ll = 0.0;
  for (double r : returns) {
    double m = spec.mu;
    for (std::size_t i = 0; i < spec.ar.size(); ++i) m += spec.ar[i] * ret_lags[i];
    for (std::size_t j = 0; j < spec.ma.size(); ++j) m += spec.ma[j] * eps_lags[j];
    double var = spec.alpha0;
    for (std::size_t i = 0; i < spec.alpha.size(); ++i) var += spec.alpha[i] * sq_lags[i];
    for (std::size_t j = 0; j < spec.beta.size(); ++j) var += spec.beta[j] * var_lags[j];
    if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
    const double e = r - m;
    ll -= 0.5 * (kLog2Pi + std::log(var) + e * e / var);
    push_front(ret_lags, r);
    push_front(eps_lags, e);
    push_front(sq_lags, e * e);
    push_front(var_lags, var);
  }
  return ll;
}

GarchSpec fit_garch(std::span<const double> returns, int p, int q, int arma_p, int arma_q,
                    const FitOptions& options) {
  if (p < 1 || q < 0 || arma_p < 0 || arma_q < 0) throw DomainError("invalid GARCH/ARMA orders");
  const std::size_t min_len = std::size_t(50 * (p + q + 1));
  if (returns.size() < min_len) {
    throw DomainError("need at least " + std::to_string(min_len) + " returns, got " + std::to_string(returns.size()));
  }
  for (double r : returns)
    if (!std::isfinite(r)) throw DomainError("returns must be finite");

  const double raw_mean = mean_of(returns);
  const double raw_var = variance_of(returns, raw_mean);
  // rounding leaves a constant series with a tiny nonzero variance
  if (!(raw_var > 1e-24 * std::max(1.0, raw_mean * raw_mean * 1e12))) throw DomainError("returns have zero variance");

  // Fit on unit-variance data for conditioning, then scale back.
  const double sd = std::sqrt(raw_var);
  std::vector<double> y(returns.size());
  for (std::size_t t = 0; t < y.size(); ++t) y[t] = returns[t] / sd;
  const double y_mean = raw_mean / sd;

  const Layout layout{p, q, arma_p, arma_q};
  double alpha0 = 0.0;
  std::vector<double> alpha, beta;
  moment_start(y, y_mean, p, q, alpha0, alpha, beta);
  std::vector<double> x0 = layout.encode(y_mean, alpha0, alpha, beta);

  std::vector<double> steps(layout.size(), 0.5);
  steps[0] = 0.05;
  for (int i = 0; i < arma_p + arma_q; ++i) steps[std::size_t(1 + i)] = 0.1;

  const double n = double(y.size());
  auto objective = [&](const std::vector<double>& x) {
    const double ll = garch_log_likelihood(layout.decode(x), y);
    return std::isfinite(ll) ? -ll / n : 1e10;
  };
  const auto result = detail::nelder_mead(objective, x0, steps, options.max_iterations, options.tolerance);

  GarchSpec spec = layout.decode(result.x);
  spec.mu *= sd;
  spec.alpha0 *= raw_var;
  if (!result.converged) {
    throw FitError("GARCH fit did not converge within " + std::to_string(options.max_iterations) + " iterations",
                   spec);
  }
  spec.validate();
  return spec;
}

CorrelationMatrix estimate_correlation(const std::vector<std::vector<double>>& series,
                                       const std::vector<std::string>& names) {
  const std::size_t n = series.size();
  if (n == 0) throw DomainError("no series to correlate");
  const std::size_t len = series[0].size();
  if (len < 2) throw DomainError("correlation needs at least two observations");
  auto name = [&](std::size_t i) { return i < names.size() ? names[i] : "#" + std::to_string(i); };

  std::vector<double> means(n), sds(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (series[i].size() != len) throw DomainError("series '" + name(i) + "' has a different length");
    means[i] = mean_of(series[i]);
    sds[i] = std::sqrt(variance_of(series[i], means[i]));
    if (!(sds[i] > 0.0)) throw DomainError("series '" + name(i) + "' has zero variance");
  }
  CorrelationMatrix corr = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double cov = 0.0;
      for (std::size_t t = 0; t < len; ++t) cov += (series[i][t] - means[i]) * (series[j][t] - means[j]);
      const double rho = std::clamp(cov / double(len) / (sds[i] * sds[j]), -1.0, 1.0);
      corr(i, j) = corr(j, i) = rho;
    }
  }
  return corr;
}

Matrix psd_factor(const CorrelationMatrix& corr) {
  const std::size_t n = corr.size();
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(corr(i, i) - 1.0) > 1e-9) problems.push_back("diagonal entry " + std::to_string(i) + " is not 1");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(corr(i, j) - corr(j, i)) > 1e-12)
        problems.push_back("matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      if (std::abs(corr(i, j)) > 1.0) problems.push_back("entry outside [-1, 1]");
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));

  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(Eigen::Index(i), Eigen::Index(j)) = corr(i, j);

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    // Reject numerically singular factors too.
    const Eigen::MatrixXd l = llt.matrixL();
    ok = l.diagonal().minCoeff() > 1e-7;
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    Eigen::VectorXd values = eig.eigenvalues().cwiseMax(1e-10);
    Eigen::MatrixXd repaired = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::VectorXd inv_sd = repaired.diagonal().cwiseSqrt().cwiseInverse();
    repaired = inv_sd.asDiagonal() * repaired * inv_sd.asDiagonal();
    repaired = 0.5 * (repaired + repaired.transpose());
    llt.compute(repaired);
    if (llt.info() != Eigen::Success) throw DomainError("correlation matrix could not be repaired");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  Matrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) out(i, j) = l(Eigen::Index(i), Eigen::Index(j));
  return out;
}

PathModel::PathModel(std::vector<GarchSpec> specs, const CorrelationMatrix& corr, std::vector<double> origin_prices,
                     std::uint64_t seed)
    : specs_(std::move(specs)), origin_(std::move(origin_prices)), seed_(seed) {
  std::vector<std::string> problems;
  if (corr.size() != specs_.size()) problems.push_back("correlation matrix size does not match the asset count");
  if (origin_.size() != specs_.size()) problems.push_back("origin price count does not match the asset count");
  for (double p : origin_)
    if (!(p > 0.0)) problems.push_back("origin prices must be positive");
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    try {
      specs_[i].validate();
    } catch (const ValidationError& e) {
      for (const auto& msg : e.problems()) problems.push_back("asset #" + std::to_string(i) + ": " + msg);
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  factor_ = psd_factor(corr);
}

PathModel::Cursor::Cursor(const PathModel& model, std::uint64_t path_index)
    : model_(&model),
      path_index_(path_index),
      cumulative_(model.specs_.size(), 0.0),
      raw_(model.specs_.size() + 1, 0.0) {
  states_.reserve(model.specs_.size());
  for (const auto& s : model.specs_) states_.push_back(initial_state(s));
}

void PathModel::Cursor::advance(std::span<double> prices_out, std::span<double> innovations) {
  const PathModel& m = *model_;
  const std::size_t n = m.specs_.size();
  const NormalStream normals(m.seed_, path_index_);
  for (std::size_t b = 0; 2 * b < n; ++b) {
    const auto pair = normals.normal_pair(step_, std::uint32_t(b));
    raw_[2 * b] = pair[0];
    raw_[2 * b + 1] = pair[1];
  }
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k <= i; ++k) z += m.factor_(i, k) * raw_[k];
    if (!innovations.empty()) innovations[i] = z;
    cumulative_[i] += garch_step(m.specs_[i], states_[i], z).log_return;
    prices_out[i] = m.origin_[i] * std::exp(cumulative_[i]);
  }
  ++step_;
}

PricePathSet simulate_paths(const std::vector<GarchSpec>& specs, const CorrelationMatrix& corr,
                            const std::vector<double>& origin_prices, std::size_t n_steps, std::size_t n_paths,
                            std::uint64_t seed, std::int64_t step_seconds) {
  if (n_steps < 1 || n_paths < 1) throw DomainError("n_steps and n_paths must be >= 1");
  const PathModel model(specs, corr, origin_prices, seed);
  const std::size_t n = specs.size();
  PricePathSet out{n_paths, n_steps, n, step_seconds, origin_prices, {}};
  out.prices.resize(n_paths * (n_steps + 1) * n);
  for (std::size_t path = 0; path < n_paths; ++path) {
    auto cursor = model.cursor(path);
    double* row = out.prices.data() + path * (n_steps + 1) * n;
    std::copy(origin_prices.begin(), origin_prices.end(), row);
    for (std::size_t s = 1; s <= n_steps; ++s) cursor.advance(std::span<double>(row + s * n, n));
  }
  return out;
}

}  // namespace risksim::price
