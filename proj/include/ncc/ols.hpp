#pragma once

// Least-squares core: design assembly, QR-based fitting and Wald t-tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ncc/datagen.hpp"
#include "ncc/design.hpp"
#include "ncc/error.hpp"
#include "ncc/special.hpp"

namespace ncc {

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> columns;
  Eigen::VectorXd y;

  Eigen::Index column(std::string_view label) const {
    const auto it = std::find(columns.begin(), columns.end(), label);
    if (it == columns.end()) throw ConfigError("design has no column '" + std::string(label) + "'");
    return static_cast<Eigen::Index>(it - columns.begin());
  }
  bool has_column(std::string_view label) const {
    return std::find(columns.begin(), columns.end(), label) != columns.end();
  }
};

inline std::string treatment_label(int arm) { return "trt" + std::to_string(arm); }

// Reference-coded indicators for intervals 2..S of a partition.
struct IntervalAdjustment {
  Partition partition;
  std::string prefix;  // "per" or "cal"
};

// Precomputed basis columns, one row per record.
struct BasisAdjustment {
  Eigen::MatrixXd basis;
  std::vector<std::string> labels;
};

using TimeAdjustment = std::variant<std::monostate, IntervalAdjustment, BasisAdjustment>;

// Arms 1..K with at least one record, ascending.
inline std::vector<int> arms_present(std::span<const PatientRecord> data) {
  std::set<int> arms;
  for (const auto& r : data)
    if (r.arm > 0) arms.insert(r.arm);
  return {arms.begin(), arms.end()};
}

inline DesignMatrix build_design(std::span<const PatientRecord> data, const std::vector<int>& treatments,
                                 const TimeAdjustment& adjustment) {
  const auto n = static_cast<Eigen::Index>(data.size());
  std::size_t time_cols = 0;
  if (const auto* iv = std::get_if<IntervalAdjustment>(&adjustment)) time_cols = iv->partition.size() - 1;
  if (const auto* bs = std::get_if<BasisAdjustment>(&adjustment)) {
    if (bs->basis.rows() != n) throw ConfigError("basis rows do not match the data");
    time_cols = static_cast<std::size_t>(bs->basis.cols());
  }
  const auto p = static_cast<Eigen::Index>(1 + treatments.size() + time_cols);

  DesignMatrix dm;
  dm.X = Eigen::MatrixXd::Zero(n, p);
  dm.y.resize(n);
  dm.columns.reserve(static_cast<std::size_t>(p));
  dm.columns.emplace_back("(Intercept)");
  for (int k : treatments) dm.columns.push_back(treatment_label(k));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = data[static_cast<std::size_t>(i)];
    dm.X(i, 0) = 1.0;
    dm.y(i) = r.response;
    const auto it = std::find(treatments.begin(), treatments.end(), r.arm);
    if (it != treatments.end()) dm.X(i, 1 + (it - treatments.begin())) = 1.0;
  }

  const auto offset = static_cast<Eigen::Index>(1 + treatments.size());
  if (const auto* iv = std::get_if<IntervalAdjustment>(&adjustment)) {
    for (std::size_t s = 2; s <= iv->partition.size(); ++s)
      dm.columns.push_back(iv->prefix + std::to_string(s));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = iv->partition.index(data[static_cast<std::size_t>(i)].time);
      if (s >= 2) dm.X(i, offset + static_cast<Eigen::Index>(s) - 2) = 1.0;
    }
  } else if (const auto* bs = std::get_if<BasisAdjustment>(&adjustment)) {
    dm.columns.insert(dm.columns.end(), bs->labels.begin(), bs->labels.end());
    dm.X.rightCols(bs->basis.cols()) = bs->basis;
  }
  return dm;
}

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  double sigma2_hat = 0.0;
  int df = 0;
  std::vector<std::string> columns;
  Eigen::VectorXd residuals;

  Eigen::Index column(std::string_view label) const {
    const auto it = std::find(columns.begin(), columns.end(), label);
    if (it == columns.end()) throw ConfigError("fit has no coefficient '" + std::string(label) + "'");
    return static_cast<Eigen::Index>(it - columns.begin());
  }
};

inline constexpr double rank_tolerance = 1e-10;

// Throws RankDeficientError naming the columns outside the numerical column space.
inline void require_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& columns) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(rank_tolerance);
  const auto rank = qr.rank();
  if (rank == X.cols()) return;
  std::vector<std::string> dropped;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = rank; i < X.cols(); ++i)
    dropped.push_back(columns.at(static_cast<std::size_t>(perm(i))));
  std::string msg = "design matrix is rank deficient; collinear columns:";
  for (const auto& c : dropped) msg += " " + c;
  throw RankDeficientError(msg, std::move(dropped));
}

inline OlsFit ols_fit(const DesignMatrix& dm) {
  const auto n = dm.X.rows();
  const auto p = dm.X.cols();
  if (n <= p) throw DataError("least squares needs more observations than columns");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dm.X);
  qr.setThreshold(rank_tolerance);
  if (qr.rank() < p) require_full_rank(dm.X, dm.columns);

  OlsFit fit;
  fit.columns = dm.columns;
  fit.beta = qr.solve(dm.y);
  fit.residuals = dm.y - dm.X * fit.beta;
  fit.df = static_cast<int>(n - p);
  fit.sigma2_hat = fit.residuals.squaredNorm() / fit.df;

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  const auto P = qr.colsPermutation();
  fit.cov = fit.sigma2_hat * (P * inner * P.transpose());
  return fit;
}

enum class Sided { one_greater, two };

inline std::string_view to_string(Sided s) { return s == Sided::two ? "two" : "one_greater"; }

inline Sided parse_sided(std::string_view s) {
  if (s == "one_greater" || s == "one" || s == "greater") return Sided::one_greater;
  if (s == "two" || s == "two_sided") return Sided::two;
  throw ConfigError("unknown sidedness '" + std::string(s) + "' (use one_greater or two)");
}

struct WaldResult {
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_one = 0.0;  // P(T > t), for H0: coefficient <= 0
  double p_two = 0.0;

  double p(Sided sided) const { return sided == Sided::two ? p_two : p_one; }
};

inline WaldResult wald_from(double estimate, double variance, double df) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw DegenerateFitError("standard error is zero; fit is degenerate");
  WaldResult w;
  w.estimate = estimate;
  w.se = std::sqrt(variance);
  w.t = estimate / w.se;
  w.df = df;
  w.p_one = student_t_sf(w.t, df);
  w.p_two = std::min(1.0, 2.0 * student_t_sf(std::fabs(w.t), df));
  return w;
}

inline WaldResult wald_test(const OlsFit& fit, std::string_view coefficient) {
  const auto i = fit.column(coefficient);
  return wald_from(fit.beta(i), fit.cov(i, i), fit.df);
}

}  // namespace ncc
