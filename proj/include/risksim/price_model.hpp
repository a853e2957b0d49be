#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "risksim/errors.hpp"

// ARMA-GARCH log-return models with constant cross-asset innovation
// correlation, plus the estimators that fit them from price history.
namespace risksim::price {

/// Mean: r_t = mu + sum ar_i r_{t-i} + sum ma_j eps_{t-j} + eps_t
/// Variance: sigma_t^2 = alpha0 + sum alpha_i eps_{t-i}^2 + sum beta_j sigma_{t-j}^2
struct GarchSpec {
  double mu = 0.0;
  std::vector<double> ar;
  std::vector<double> ma;
  double alpha0 = 0.0;
  std::vector<double> alpha;
  std::vector<double> beta;

  double persistence() const;
  /// alpha0 / (1 - persistence); requires a stationary spec.
  double unconditional_variance() const;
  /// Throws ValidationError when alpha0 <= 0, a coefficient is negative or the process is not stationary.
  void validate() const;

  friend bool operator==(const GarchSpec&, const GarchSpec&) = default;
};

/// Lag buffers, most recent first.
struct GarchState {
  std::vector<double> returns;
  std::vector<double> innovations;
  std::vector<double> variances;
};

/// Lags at their stationary values: innovations 0, variances at the unconditional level, returns at the mean.
GarchState initial_state(const GarchSpec& spec);

struct StepResult {
  double log_return;
  double variance;
  double innovation;
};

StepResult garch_step(const GarchSpec& spec, GarchState& state, double z);

/// Dense symmetric matrix, row-major.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * n_ + c]; }
  std::vector<std::vector<double>> rows() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

using CorrelationMatrix = Matrix;

std::vector<double> log_returns(std::span<const double> prices);

struct FitOptions {
  int max_iterations = 2000;
  double tolerance = 1e-8;  // on the per-observation log-likelihood
};

class FitError : public Error {
 public:
  FitError(const std::string& what, GarchSpec best) : Error(what), best_(std::move(best)) {}
  const GarchSpec& best_so_far() const { return best_; }

 private:
  GarchSpec best_;
};

/// Gaussian log-likelihood of `returns` under `spec`.
double garch_log_likelihood(const GarchSpec& spec, std::span<const double> returns);

/// Gaussian quasi-maximum-likelihood fit of GARCH(p, q) with an ARMA(arma_p, arma_q) mean.
GarchSpec fit_garch(std::span<const double> returns, int p = 1, int q = 1, int arma_p = 0, int arma_q = 0,
                    const FitOptions& options = {});

/// Pearson correlation of equal-length series. `names` labels errors.
CorrelationMatrix estimate_correlation(const std::vector<std::vector<double>>& series,
                                       const std::vector<std::string>& names = {});

/// Lower-triangular L with L·Lᵀ = corr, after eigenvalue repair when corr is not positive definite.
Matrix psd_factor(const CorrelationMatrix& corr);

/// n_paths × (n_steps + 1) × n_assets prices; step 0 holds the origin prices.
struct PricePathSet {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::size_t n_assets = 0;
  std::int64_t step_seconds = 50;
  std::vector<double> origin;
  std::vector<double> prices;

  double at(std::size_t path, std::size_t step, std::size_t asset) const {
    return prices[(path * (n_steps + 1) + step) * n_assets + asset];
  }
};

/// Shared, immutable inputs for drawing correlated multi-asset paths.
class PathModel {
 public:
  PathModel(std::vector<GarchSpec> specs, const CorrelationMatrix& corr, std::vector<double> origin_prices,
            std::uint64_t seed);

  std::size_t asset_count() const { return specs_.size(); }
  const std::vector<double>& origin() const { return origin_; }
  const Matrix& factor() const { return factor_; }

  /// Walks one path step by step; output depends only on (seed, path_index, step).
  class Cursor {
   public:
    /// Advances one step and writes prices. `innovations` optionally receives the correlated z.
    void advance(std::span<double> prices_out, std::span<double> innovations = {});
    std::uint64_t step() const { return step_; }

   private:
    friend class PathModel;
    Cursor(const PathModel& model, std::uint64_t path_index);

    const PathModel* model_;
    std::uint64_t path_index_;
    std::uint64_t step_ = 0;
    std::vector<GarchState> states_;
    std::vector<double> cumulative_;
    std::vector<double> raw_;
  };

  Cursor cursor(std::uint64_t path_index) const { return Cursor(*this, path_index); }

 private:
  std::vector<GarchSpec> specs_;
  Matrix factor_;
  std::vector<double> origin_;
  std::uint64_t seed_;
};

PricePathSet simulate_paths(const std::vector<GarchSpec>& specs, const CorrelationMatrix& corr,
                            const std::vector<double>& origin_prices, std::size_t n_steps, std::size_t n_paths,
                            std::uint64_t seed, std::int64_t step_seconds = 50);

}  // namespace risksim::price
