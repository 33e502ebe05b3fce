#pragma once

// Bayesian optimization of the guidance hyperparameters: Matern-5/2 GP
// regression, upper-confidence-bound acquisition and the run reward.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/sobol.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include "pnrace/common.hpp"

namespace pnrace {

struct RewardConfig {
  double c_t = 10.0;  // [s]
  double c_d = 3.0;  // [1/m]
  double c = 0.0;

  /// Trades time against center distance.
  static RewardConfig distance_time() { return {10.0, 3.0, 0.0}; }
  /// Conservative: center distance only.
  static RewardConfig distance() { return {0.0, 5.0, 3.0}; }

  void validate() const {
    if (!(c_t >= 0.0 && c_d >= 0.0 && c >= 0.0)) throw std::invalid_argument("reward weights must be >= 0");
  }
};

inline double reward(const RewardConfig& cfg, double t_gate, double d_center) {
  if (!(t_gate > 0.0)) throw std::invalid_argument("t_gate must be positive");
  if (!(d_center >= 0.0)) throw std::invalid_argument("d_center must be non-negative");
  return std::max(0.0, cfg.c_t / t_gate - cfg.c_d * d_center + cfg.c);
}

inline double matern25(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& lengthscales,
                       double variance) {
  const double r = (a - b).cwiseQuotient(lengthscales).norm();
  const double s = std::sqrt(5.0) * r;
  return variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

struct KernelParams {
  Eigen::VectorXd lengthscales;
  double variance = 1.0;
  double noise_var = 1e-6;
};

inline constexpr double kNoiseFloor = 1e-6;

namespace detail {

/// Nelder-Mead (GSL nmsimplex2) minimization of an unconstrained function.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                   double step, int max_iter, double size_tol = 1e-5) {
  const auto n = static_cast<size_t>(x0.size());
  struct Ctx {
    const std::function<double(const Eigen::VectorXd&)>* f;
  } ctx{&f};
  gsl_multimin_function fn;
  fn.n = n;
  fn.params = &ctx;
  fn.f = [](const gsl_vector* v, void* p) -> double {
    const auto* c = static_cast<Ctx*>(p);
    Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
    for (size_t i = 0; i < v->size; ++i) x(static_cast<Eigen::Index>(i)) = gsl_vector_get(v, i);
    const double val = (*c->f)(x);
    return std::isfinite(val) ? val : std::numeric_limits<double>::max();
  };

  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0(static_cast<Eigen::Index>(i)));
    gsl_vector_set(ss, i, step);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  for (int it = 0; it < max_iter; ++it) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol) == GSL_SUCCESS) break;
  }
  Eigen::VectorXd best(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) best(static_cast<Eigen::Index>(i)) = gsl_vector_get(s->x, i);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return best;
}

struct GslErrorsOff {
  GslErrorsOff() : old(gsl_set_error_handler_off()) {}
  ~GslErrorsOff() { gsl_set_error_handler(old); }
  gsl_error_handler_t* old;
};

}  // namespace detail

/// GP regression on inputs in the unit hypercube. The prior mean is the
/// sample mean of the observations.
class GpModel {
 public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  explicit GpModel(int dim) : dim_(dim) {
    params_.lengthscales = Eigen::VectorXd::Constant(dim, 0.3);
  }
  GpModel(int dim, KernelParams params) : dim_(dim), params_(std::move(params)) {
    if (params_.lengthscales.size() != dim) throw std::invalid_argument("lengthscale dimension mismatch");
    if (!(params_.lengthscales.array() > 0.0).all() || !(params_.variance > 0.0) || !(params_.noise_var >= 0.0)) {
      throw std::invalid_argument("kernel parameters must be positive");
    }
  }

  int dim() const { return dim_; }
  std::size_t size() const { return y_.size(); }
  const KernelParams& params() const { return params_; }
  double prior_mean() const { return prior_mean_; }
  double jitter() const { return jitter_; }

  void add_sample(const Eigen::VectorXd& x, double y) {
    if (x.size() != dim_) throw std::invalid_argument("sample dimension mismatch");
    x_.push_back(x);
    y_.push_back(y);
    factorize();
  }

  void set_params(const KernelParams& p) {
    params_ = p;
    factorize();
  }

  Prediction posterior(const Eigen::VectorXd& x) const {
    if (y_.empty()) return {prior_mean_, params_.variance};
    const Eigen::VectorXd k = cross_cov(x);
    Prediction p;
    p.mean = prior_mean_ + k.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    p.variance = std::max(0.0, params_.variance - v.squaredNorm());
    return p;
  }

  double log_marginal_likelihood() const {
    if (y_.empty()) return 0.0;
    const auto n = static_cast<double>(y_.size());
    const Eigen::MatrixXd l = llt_.matrixL();
    return -0.5 * centered_.dot(alpha_) - l.diagonal().array().log().sum() - 0.5 * n * std::log(2.0 * kPi);
  }

  /// Maximizes the log marginal likelihood over log lengthscales, log signal
  /// variance and log noise variance (floored at kNoiseFloor). Starts from
  /// the current parameters plus `restarts` random points.
  void fit_hyperparameters(std::uint64_t seed, int restarts = 5) {
    if (y_.size() < 2) return;
    detail::GslErrorsOff guard;
    const double mean = prior_mean_;
    double var_y = 0.0;
    for (double v : y_) var_y += (v - mean) * (v - mean);
    var_y /= static_cast<double>(y_.size());
    const double scale = std::max(var_y, 1e-4);

    const int n = dim_ + 2;
    Eigen::VectorXd lo(n), hi(n);
    lo.head(dim_).setConstant(std::log(0.05));
    hi.head(dim_).setConstant(std::log(3.0));
    lo(dim_) = std::log(scale * 1e-2);
    hi(dim_) = std::log(scale * 1e2);
    lo(dim_ + 1) = std::log(kNoiseFloor);
    hi(dim_ + 1) = std::log(std::max(scale, 2 * kNoiseFloor));

    const auto decode = [&](const Eigen::VectorXd& z) {
      const Eigen::VectorXd c = z.cwiseMax(lo).cwiseMin(hi);
      KernelParams p;
      p.lengthscales = c.head(dim_).array().exp();
      p.variance = std::exp(c(dim_));
      p.noise_var = std::exp(c(dim_ + 1));
      return p;
    };
    const auto objective = [&](const Eigen::VectorXd& z) {
      GpModel trial(*this);
      try {
        trial.set_params(decode(z));
      } catch (const NumericalFailureError&) {
        return std::numeric_limits<double>::infinity();
      }
      // Out-of-box excursions are penalized so the simplex walks back.
      const double excess = (z - z.cwiseMax(lo).cwiseMin(hi)).squaredNorm();
      return -trial.log_marginal_likelihood() + 1e3 * excess;
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd start(n);
    start.head(dim_) = params_.lengthscales.array().log();
    start(dim_) = std::log(params_.variance);
    start(dim_ + 1) = std::log(std::max(params_.noise_var, kNoiseFloor));
    start = start.cwiseMax(lo).cwiseMin(hi);

    KernelParams best = decode(start);
    double best_val = objective(start);
    for (int r = 0; r <= restarts; ++r) {
      Eigen::VectorXd z0 = start;
      if (r > 0) {
        for (int i = 0; i < n; ++i) z0(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
      }
      const Eigen::VectorXd z = detail::nelder_mead(objective, z0, 0.5, 400);
      const double val = objective(z);
      if (val < best_val) {
        best_val = val;
        best = decode(z);
      }
    }
    set_params(best);
  }

 private:
  Eigen::VectorXd cross_cov(const Eigen::VectorXd& x) const {
    Eigen::VectorXd k(static_cast<Eigen::Index>(x_.size()));
    for (std::size_t i = 0; i < x_.size(); ++i) {
      k(static_cast<Eigen::Index>(i)) = matern25(x, x_[i], params_.lengthscales, params_.variance);
    }
    return k;
  }

  void factorize() {
    const auto n = static_cast<Eigen::Index>(y_.size());
    if (n == 0) return;
    prior_mean_ = std::accumulate(y_.begin(), y_.end(), 0.0) / static_cast<double>(n);
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        k(i, j) = k(j, i) = matern25(x_[i], x_[j], params_.lengthscales, params_.variance);
      }
    }
    k.diagonal().array() += params_.noise_var;
    jitter_ = 0.0;
    llt_.compute(k);
    for (double jit = 1e-10 * params_.variance; llt_.info() != Eigen::Success; jit *= 10.0) {
      if (jit > 1e-2 * params_.variance) throw NumericalFailureError("kernel matrix not positive definite");
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += jit;
      llt_.compute(kj);
      jitter_ = jit;
    }
    centered_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) centered_(i) = y_[static_cast<std::size_t>(i)] - prior_mean_;
    alpha_ = llt_.solve(centered_);
  }

  int dim_;
  KernelParams params_;
  std::vector<Eigen::VectorXd> x_;
  std::vector<double> y_;
  double prior_mean_ = 0.0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd centered_;
  Eigen::VectorXd alpha_;
};

/// Box over (k_pn, gamma_bar [rad]); may collapse to a point in any axis.
struct SearchSpace {
  Vec2 lo{0.3, deg2rad(5.0)};
  Vec2 hi{3.0, deg2rad(30.0)};

  void validate() const {
    if (!(lo.array() <= hi.array()).all()) throw std::invalid_argument("search space bounds inverted");
  }

  Vec2 to_unit(const Vec2& x) const {
    Vec2 u;
    for (int i = 0; i < 2; ++i) u(i) = hi(i) > lo(i) ? (x(i) - lo(i)) / (hi(i) - lo(i)) : 0.5;
    return u;
  }
  Vec2 from_unit(const Vec2& u) const {
    const Vec2 c = u.cwiseMax(0.0).cwiseMin(1.0);
    return lo + (hi - lo).cwiseProduct(c);
  }
  Vec2 clamp(const Vec2& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

inline double ucb(const GpModel& model, const Eigen::VectorXd& u, double beta) {
  const auto p = model.posterior(u);
  return p.mean + std::sqrt(beta) * std::sqrt(p.variance);
}

inline constexpr int kUcbGrid = 200;

/// Maximizer of mean + sqrt(beta) * std over the space: best points of a
/// 200x200 grid, each refined by a clamped simplex search. With no data the
/// space center is returned.
inline Vec2 ucb_next(const GpModel& model, const SearchSpace& space, double beta, int refine_starts = 5) {
  if (model.size() == 0) return space.from_unit(Vec2(0.5, 0.5));
  std::vector<std::pair<double, Vec2>> scored;
  scored.reserve(kUcbGrid * kUcbGrid);
  Eigen::VectorXd u(2);
  for (int i = 0; i < kUcbGrid; ++i) {
    for (int j = 0; j < kUcbGrid; ++j) {
      u << i / double(kUcbGrid - 1), j / double(kUcbGrid - 1);
      scored.emplace_back(ucb(model, u, beta), Vec2(u(0), u(1)));
    }
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(refine_starts), scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });

  detail::GslErrorsOff guard;
  Vec2 best = scored.front().second;
  double best_val = scored.front().first;
  const auto neg_acq = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd c = z.cwiseMax(0.0).cwiseMin(1.0);
    return -ucb(model, c, beta);
  };
  for (std::size_t s = 0; s < k; ++s) {
    const Eigen::VectorXd z = detail::nelder_mead(neg_acq, scored[s].second, 0.5 / (kUcbGrid - 1), 200, 1e-7);
    const Vec2 c = Vec2(z(0), z(1)).cwiseMax(0.0).cwiseMin(1.0);
    const double val = ucb(model, c, beta);
    if (val > best_val) {
      best_val = val;
      best = c;
    }
  }
  return space.from_unit(best);
}

/// First n points of the 2-D Sobol sequence, (0.5, 0.5) first.
inline std::vector<Vec2> sobol_points(int n) {
  boost::random::sobol gen(2);
  const double denom = static_cast<double>(gen.max()) + 1.0;
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(gen()) / denom;
    const double b = static_cast<double>(gen()) / denom;
    pts.emplace_back(a, b);
  }
  return pts;
}

struct BoOptions {
  int iterations = 25;  // total objective evaluations
  int initial_points = 4;  // Sobol points before the first GP fit
  double beta = 4.0;
  int hyper_restarts = 5;
  std::uint64_t seed = 1;
  bool shift_sobol = false;  // random Cranley-Patterson shift of the start design
};

struct BoRecord {
  int iteration = 0;
  Vec2 x = Vec2::Zero();
  double value = 0.0;
};

struct BoResult {
  Vec2 best = Vec2::Zero();
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<BoRecord> history;
};

/// Maximizes f over the space: Sobol initialization, then GP fit and UCB
/// proposal each iteration. Returns the best observed point.
template <typename Objective>
BoResult bayes_optimize(const SearchSpace& space, Objective&& f, const BoOptions& opt) {
  space.validate();
  if (opt.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  GpModel model(2);
  BoResult result;
  auto init = sobol_points(std::min(opt.initial_points, opt.iterations));
  if (opt.shift_sobol) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Vec2 shift(unit(rng), unit(rng));
    for (Vec2& p : init) p = (p + shift).unaryExpr([](double v) { return v - std::floor(v); });
  }
  for (int it = 0; it < opt.iterations; ++it) {
    Vec2 x;
    if (it < static_cast<int>(init.size())) {
      x = space.from_unit(init[static_cast<std::size_t>(it)]);
    } else {
      model.fit_hyperparameters(opt.seed * 1000003ULL + static_cast<std::uint64_t>(it), opt.hyper_restarts);
      x = ucb_next(model, space, opt.beta);
    }
    const double y = f(x);
    model.add_sample(space.to_unit(x), y);
    result.history.push_back({it, x, y});
    if (y > result.best_value) {
      result.best_value = y;
      result.best = x;
    }
  }
  return result;
}

}  // namespace pnrace
