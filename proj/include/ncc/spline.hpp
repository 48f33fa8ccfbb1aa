#pragma once

// B-spline bases over recruitment time with knots at period or calendar starts.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ncc/design.hpp"
#include "ncc/error.hpp"

namespace ncc {

class SplineBasis {
 public:
  // Candidate inner knots are sorted; duplicates and knots on or outside the
  // boundary are dropped.
  SplineBasis(int degree, std::vector<double> inner_knots, double lower, double upper)
      : degree_(degree), lower_(lower), upper_(upper) {
    if (degree < 1 || degree > 3) throw ConfigError("spline degree must be 1, 2 or 3");
    if (!(upper > lower)) throw ConfigError("spline boundary knots must satisfy lower < upper");
    std::sort(inner_knots.begin(), inner_knots.end());
    for (double k : inner_knots)
      if (k > lower && k < upper && (inner_.empty() || k > inner_.back())) inner_.push_back(k);
    knots_.assign(static_cast<std::size_t>(degree_ + 1), lower_);
    knots_.insert(knots_.end(), inner_.begin(), inner_.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(degree_ + 1), upper_);
  }

  int degree() const noexcept { return degree_; }
  const std::vector<double>& inner_knots() const noexcept { return inner_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  // Padded knot vector: boundaries repeated degree + 1 times.
  const std::vector<double>& knot_vector() const noexcept { return knots_; }
  std::size_t dimension() const noexcept { return inner_.size() + static_cast<std::size_t>(degree_) + 1; }

  // Values of all basis functions at t. Uses the triangular Cox-de Boor scheme
  // on the single knot span containing t; the right boundary belongs to the
  // last non-empty span.
  std::vector<double> evaluate(double t) const {
    if (!(t >= lower_ && t <= upper_))
      throw DataError("spline argument " + std::to_string(t) + " outside [" + std::to_string(lower_) +
                      ", " + std::to_string(upper_) + "]");
    const std::size_t p = static_cast<std::size_t>(degree_);
    const std::size_t span = find_span(t);
    std::vector<double> local(p + 1, 0.0), left(p + 1, 0.0), right(p + 1, 0.0);
    local[0] = 1.0;
    for (std::size_t j = 1; j <= p; ++j) {
      left[j] = t - knots_[span + 1 - j];
      right[j] = knots_[span + j] - t;
      double saved = 0.0;
      for (std::size_t r = 0; r < j; ++r) {
        const double temp = local[r] / (right[r + 1] + left[j - r]);
        local[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      local[j] = saved;
    }
    std::vector<double> values(dimension(), 0.0);
    for (std::size_t r = 0; r <= p; ++r) values[span - p + r] = local[r];
    return values;
  }

 private:
  std::size_t find_span(double t) const {
    const std::size_t p = static_cast<std::size_t>(degree_);
    const std::size_t last = dimension() - 1;  // index of the last basis function
    if (t >= knots_[last + 1]) return last;
    const auto it = std::upper_bound(knots_.begin() + static_cast<std::ptrdiff_t>(p),
                                     knots_.begin() + static_cast<std::ptrdiff_t>(last + 1), t);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  int degree_;
  double lower_;
  double upper_;
  std::vector<double> inner_;
  std::vector<double> knots_;
};

// Inner knots at the starts of periods 2..S_M.
inline std::vector<double> knots_from_periods(const Partition& periods) {
  return {periods.starts().begin() + 1, periods.starts().end()};
}

// Inner knots at the starts of calendar units 2..C_M.
inline std::vector<double> knots_from_calendar(const Partition& calendar) {
  return {calendar.starts().begin() + 1, calendar.starts().end()};
}

// One row per time. With `drop_first`, the first column is omitted so the
// basis can sit next to an intercept without collinearity.
inline Eigen::MatrixXd basis_matrix(std::span<const double> times, const SplineBasis& basis,
                                    bool drop_first = false) {
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  const Eigen::Index skip = drop_first ? 1 : 0;
  Eigen::MatrixXd B(static_cast<Eigen::Index>(times.size()), dim - skip);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto row = basis.evaluate(times[i]);
    for (Eigen::Index c = skip; c < dim; ++c)
      B(static_cast<Eigen::Index>(i), c - skip) = row[static_cast<std::size_t>(c)];
  }
  return B;
}

inline std::vector<std::string> basis_labels(const SplineBasis& basis, bool drop_first) {
  std::vector<std::string> labels;
  for (std::size_t c = drop_first ? 1 : 0; c < basis.dimension(); ++c)
    labels.push_back("bs" + std::to_string(c + 1));
  return labels;
}

}  // namespace ncc
