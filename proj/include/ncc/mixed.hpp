#pragma once

// Linear mixed models y = X beta + Z u + e with u ~ N(0, sigma^2 gamma R) and
// e ~ N(0, sigma^2 I), where R is the identity or an AR(1) correlation over
// interval positions. Variance parameters are estimated by REML with sigma^2
// profiled out; V^-1 is applied through the Woodbury identity so each
// objective evaluation costs O(m^3 + p^3) once cross products are formed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncc/datagen.hpp"
#include "ncc/design.hpp"
#include "ncc/error.hpp"
#include "ncc/nelder_mead.hpp"
#include "ncc/ols.hpp"

namespace ncc {

enum class CovStructure { independent, ar1 };

enum class RandomGrouping { interval, arm_by_interval };

// Random-effect layout of a mixed model. Arm-by-interval effects are modelled
// as uncorrelated.
struct MixedSpec {
  RandomGrouping grouping = RandomGrouping::interval;
  CovStructure structure = CovStructure::independent;

  void validate() const {
    if (grouping == RandomGrouping::arm_by_interval && structure == CovStructure::ar1)
      throw ConfigError("AR(1) structure is only available for interval random intercepts");
  }
};

struct RandomDesign {
  Eigen::MatrixXd Z;
  std::vector<std::string> labels;
  std::vector<double> positions;  // interval number of each column (AR(1) lag metric)
};

// Random intercepts for intervals 2..S of `partition`.
inline RandomDesign build_random_intercepts(std::span<const PatientRecord> data, const Partition& partition,
                                            std::string_view prefix) {
  const auto m = static_cast<Eigen::Index>(partition.size()) - 1;
  if (m < 1) throw DegenerateFitError("random-effect design has no columns (single interval); fit OLS instead");
  RandomDesign rd;
  rd.Z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.size()), m);
  for (std::size_t s = 2; s <= partition.size(); ++s) {
    rd.labels.push_back(std::string(prefix) + std::to_string(s));
    rd.positions.push_back(static_cast<double>(s));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto s = partition.index(data[i].time);
    if (s >= 2) rd.Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s) - 2) = 1.0;
  }
  return rd;
}

// Random arm-by-interval effects for every arm in `arms` (the evaluated arm
// excluded by the caller) and intervals 2..S. Structurally empty columns are dropped.
inline RandomDesign build_random_interaction(std::span<const PatientRecord> data, const Partition& partition,
                                             const std::vector<int>& arms, std::string_view prefix) {
  const std::size_t S = partition.size();
  std::vector<std::size_t> interval(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) interval[i] = partition.index(data[i].time);

  RandomDesign rd;
  std::vector<Eigen::VectorXd> cols;
  for (int k : arms) {
    for (std::size_t s = 2; s <= S; ++s) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.size()));
      bool any = false;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i].arm == k && interval[i] == s) {
          col(static_cast<Eigen::Index>(i)) = 1.0;
          any = true;
        }
      if (!any) continue;
      cols.push_back(std::move(col));
      rd.labels.push_back(treatment_label(k) + ":" + std::string(prefix) + std::to_string(s));
      rd.positions.push_back(static_cast<double>(s));
    }
  }
  if (cols.empty()) throw DegenerateFitError("random-effect design has no columns; fit OLS instead");
  rd.Z.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) rd.Z.col(static_cast<Eigen::Index>(c)) = cols[c];
  return rd;
}

// Correlation rho^|a - b| between random effects at the given positions.
inline Eigen::MatrixXd ar1_correlation(const std::vector<double>& positions, double rho) {
  if (!(std::fabs(rho) < 1.0)) throw ConfigError("AR(1) correlation must satisfy |rho| < 1");
  const auto m = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd R(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const double lag = std::fabs(positions[static_cast<std::size_t>(a)] - positions[static_cast<std::size_t>(b)]);
      R(a, b) = lag == 0.0 ? 1.0 : std::pow(rho, lag);
    }
  return R;
}

inline Eigen::MatrixXd ar1_correlation(int m, double rho) {
  std::vector<double> pos(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) pos[static_cast<std::size_t>(i)] = i;
  return ar1_correlation(pos, rho);
}

struct MixedFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  std::vector<std::string> columns;
  double sigma2 = 0.0;         // residual variance
  double sigma2_random = 0.0;  // random-effect variance
  double gamma = 0.0;          // sigma2_random / sigma2
  std::optional<double> rho;   // AR(1) only
  double reml_loglik = 0.0;
  bool converged = false;
  bool boundary = false;  // variance ratio estimated at zero
  int evaluations = 0;
  int df = 0;
  std::vector<double> objective_trace;  // best negative log-likelihood per optimizer iteration

  Eigen::Index column(std::string_view label) const {
    const auto it = std::find(columns.begin(), columns.end(), label);
    if (it == columns.end()) throw ConfigError("fit has no coefficient '" + std::string(label) + "'");
    return static_cast<Eigen::Index>(it - columns.begin());
  }
};

struct RemlOptions {
  NelderMeadOptions optimizer{};
  std::optional<double> fixed_rho;  // AR(1): hold rho fixed and optimize gamma only
};

// Profiled REML criterion over the variance ratio and (for AR(1)) rho.
class RemlObjective {
 public:
  static constexpr double min_log_gamma = -30.0;
  static constexpr double max_log_gamma = 20.0;

  RemlObjective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y)
      : n_(X.rows()), p_(X.cols()), m_(Z.cols()) {
    if (Z.rows() != n_ || y.size() != n_) throw ConfigError("X, Z and y row counts differ");
    if (n_ <= p_) throw DataError("mixed model needs more observations than fixed effects");
    // Work with OLS residuals as the response: GLS of y on X equals beta_ols plus
    // GLS of the residuals, and the residuals are small and orthogonal to X.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(rank_tolerance);
    if (qr.rank() < p_) {
      std::vector<std::string> cols;
      for (Eigen::Index i = 0; i < p_; ++i) cols.push_back("x" + std::to_string(i + 1));
      require_full_rank(X, cols);
    }
    beta_ols_ = qr.solve(y);
    const Eigen::VectorXd r = y - X * beta_ols_;
    XtX_ = X.transpose() * X;
    ZtX_ = Z.transpose() * X;
    ZtZ_ = Z.transpose() * Z;
    Xtr_ = X.transpose() * r;
    Ztr_ = Z.transpose() * r;
    rtr_ = r.squaredNorm();
  }

  struct Evaluation {
    double neg_loglik = std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta;
    Eigen::MatrixXd XtVinvX;
    double sigma2 = 0.0;
    bool ok = false;
  };

  Evaluation evaluate(double gamma, const Eigen::MatrixXd& R) const {
    Evaluation ev;
    Eigen::MatrixXd XtVX = XtX_;
    Eigen::VectorXd XtVr = Xtr_;
    double rVr = rtr_;
    double logdet_A = 0.0;
    if (gamma > 0.0) {
      Eigen::LLT<Eigen::MatrixXd> cholR(R);
      if (cholR.info() != Eigen::Success) return ev;
      const Eigen::MatrixXd L = std::sqrt(gamma) * Eigen::MatrixXd(cholR.matrixL());
      Eigen::MatrixXd A = L.transpose() * ZtZ_ * L;
      A.diagonal().array() += 1.0;
      Eigen::LLT<Eigen::MatrixXd> cholA(A);
      if (cholA.info() != Eigen::Success) return ev;
      logdet_A = 2.0 * cholA.matrixLLT().diagonal().array().log().sum();
      const Eigen::MatrixXd LZX = L.transpose() * ZtX_;
      const Eigen::VectorXd LZr = L.transpose() * Ztr_;
      const Eigen::MatrixXd S = cholA.solve(LZX);
      const Eigen::VectorXd s = cholA.solve(LZr);
      XtVX.noalias() -= LZX.transpose() * S;
      XtVr.noalias() -= LZX.transpose() * s;
      rVr -= LZr.dot(s);
    }
    Eigen::LLT<Eigen::MatrixXd> cholX(XtVX);
    if (cholX.info() != Eigen::Success) return ev;
    const Eigen::VectorXd delta = cholX.solve(XtVr);
    const double quad = rVr - delta.dot(XtVr);
    if (!(quad > 0.0)) return ev;
    const double dfr = static_cast<double>(n_ - p_);
    const double logdet_X = 2.0 * cholX.matrixLLT().diagonal().array().log().sum();
    ev.sigma2 = quad / dfr;
    ev.neg_loglik =
        0.5 * (dfr * std::log(ev.sigma2) + logdet_A + logdet_X + dfr * (1.0 + std::log(2.0 * std::numbers::pi)));
    ev.beta = beta_ols_ + delta;
    ev.XtVinvX = std::move(XtVX);
    ev.ok = std::isfinite(ev.neg_loglik);
    return ev;
  }

  Eigen::Index random_columns() const noexcept { return m_; }
  Eigen::Index observations() const noexcept { return n_; }
  Eigen::Index fixed_columns() const noexcept { return p_; }

 private:
  Eigen::Index n_, p_, m_;
  Eigen::VectorXd beta_ols_;
  Eigen::MatrixXd XtX_, ZtX_, ZtZ_;
  Eigen::VectorXd Xtr_, Ztr_;
  double rtr_ = 0.0;
};

inline MixedFit reml_fit(const DesignMatrix& fixed, const RandomDesign& random, CovStructure structure,
                         const RemlOptions& options = {}) {
  if (random.Z.cols() < 1) throw DegenerateFitError("random-effect design has no columns; fit OLS instead");
  require_full_rank(fixed.X, fixed.columns);
  const RemlObjective objective(fixed.X, random.Z, fixed.y);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(random.Z.cols(), random.Z.cols());
  const bool estimate_rho = structure == CovStructure::ar1 && !options.fixed_rho;

  auto correlation = [&](double rho) -> Eigen::MatrixXd {
    if (structure == CovStructure::independent) return identity;
    return ar1_correlation(random.positions, rho);
  };
  auto unpack = [&](const std::vector<double>& x, double& gamma, double& rho) {
    gamma = std::exp(std::clamp(x[0], RemlObjective::min_log_gamma, RemlObjective::max_log_gamma));
    rho = estimate_rho ? std::tanh(x[1]) : options.fixed_rho.value_or(0.0);
  };
  auto criterion = [&](const std::vector<double>& x) {
    double gamma = 0.0, rho = 0.0;
    unpack(x, gamma, rho);
    if (!(std::fabs(rho) < 1.0)) return std::numeric_limits<double>::infinity();
    return objective.evaluate(gamma, correlation(rho)).neg_loglik;
  };

  std::vector<double> start{0.0};
  if (estimate_rho) start.push_back(0.0);
  auto nm = nelder_mead(criterion, start, options.optimizer);
  polish_minimum(criterion, nm);

  double gamma = 0.0, rho = 0.0;
  unpack(nm.x, gamma, rho);
  auto best = objective.evaluate(gamma, correlation(rho));
  MixedFit fit;
  // Variance ratio on the boundary: compare with gamma = 0 exactly.
  const auto at_zero = objective.evaluate(0.0, identity);
  if (at_zero.ok && (!best.ok || at_zero.neg_loglik <= best.neg_loglik + 1e-12)) {
    best = at_zero;
    gamma = 0.0;
    fit.boundary = true;
  }
  if (!best.ok) throw DegenerateFitError("REML objective could not be evaluated at the optimum");

  fit.columns = fixed.columns;
  fit.beta = best.beta;
  fit.sigma2 = best.sigma2;
  fit.gamma = gamma;
  fit.sigma2_random = gamma * best.sigma2;
  if (structure == CovStructure::ar1) fit.rho = fit.boundary ? 0.0 : rho;
  fit.reml_loglik = -best.neg_loglik;
  fit.converged = nm.converged;
  fit.evaluations = nm.evaluations;
  fit.objective_trace = nm.best_trace;
  fit.df = static_cast<int>(objective.observations() - objective.fixed_columns());
  fit.cov = best.sigma2 * best.XtVinvX.llt().solve(
                              Eigen::MatrixXd::Identity(best.XtVinvX.rows(), best.XtVinvX.cols()));
  return fit;
}

// Wald t-test with residual degrees of freedom N - p.
inline WaldResult mixed_wald_test(const MixedFit& fit, std::string_view coefficient) {
  const auto i = fit.column(coefficient);
  return wald_from(fit.beta(i), fit.cov(i, i), fit.df);
}

}  // namespace ncc
