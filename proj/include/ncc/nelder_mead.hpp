#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace ncc {

struct NelderMeadOptions {
  double ftol = 1e-8;        // spread of simplex values
  double xtol = 1e-8;        // simplex diameter (max-norm)
  double flat_tol = 1e-13;   // relative spread that counts as a flat objective
  int max_evaluations = 500;
  double initial_step = 1.0;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
  std::vector<double> best_trace;  // best value after each iteration
};

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
// Converged when the values agree to ftol and the simplex has collapsed to
// xtol, or when the objective is flat across the simplex.
template <typename F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opt.initial_step;
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto point = [&](double coef, const std::vector<double>& worst, std::vector<double>& out) {
    for (std::size_t d = 0; d < n; ++d) out[d] = centroid[d] + coef * (worst[d] - centroid[d]);
  };

  while (true) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    res.best_trace.push_back(vals[best]);

    const double spread = vals[worst] - vals[best];
    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        diameter = std::max(diameter, std::fabs(pts[i][d] - pts[best][d]));
    if ((spread <= opt.ftol && diameter <= opt.xtol) ||
        spread <= opt.flat_tol * (1.0 + std::fabs(vals[best]))) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= opt.max_evaluations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d] / static_cast<double>(n);

    point(-1.0, pts[worst], trial);
    const double fr = eval(trial);
    if (fr < vals[best]) {
      point(-2.0, pts[worst], trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    // Contraction toward the better of the worst point and its reflection.
    const bool outside = fr < vals[worst];
    point(outside ? -0.5 : 0.5, pts[worst], trial2);
    const double fc = eval(trial2);
    if (fc < std::min(fr, vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
      vals[i] = eval(pts[i]);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

// Newton refinement of a simplex minimum using central differences. Function
// values alone pin x to about sqrt(eps); the gradient pins it to eps / h.
// A step is kept only if it lowers f.
template <typename F>
void polish_minimum(F&& f, NelderMeadResult& res, int max_steps = 20, double h = 1e-4) {
  const auto n = static_cast<Eigen::Index>(res.x.size());
  auto at = [&](const Eigen::VectorXd& v) {
    std::vector<double> x(v.data(), v.data() + v.size());
    ++res.evaluations;
    const double y = f(x);
    return std::isfinite(y) ? y : std::numeric_limits<double>::infinity();
  };
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(res.x.data(), n);
  double fx = res.value;
  for (int step = 0; step < max_steps; ++step) {
    Eigen::VectorXd g(n);
    Eigen::MatrixXd H(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(i) = h;
      const double fp = at(x + e), fm = at(x - e);
      g(i) = (fp - fm) / (2 * h);
      H(i, i) = (fp - 2 * fx + fm) / (h * h);
      for (Eigen::Index j = 0; j < i; ++j) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        d(j) = h;
        H(i, j) = H(j, i) = (at(x + e + d) - at(x + e - d) - at(x - e + d) + at(x - e - d)) / (4 * h * h);
      }
    }
    if (!g.allFinite() || !H.allFinite()) return;
    const Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) return;
    Eigen::VectorXd dx = -llt.solve(g);
    bool moved = false;
    for (int half = 0; half < 10 && !moved; ++half, dx *= 0.5) {
      const double ft = at(x + dx);
      if (ft < fx) {
        x += dx;
        fx = ft;
        moved = true;
      }
    }
    res.best_trace.push_back(fx);
    if (!moved || dx.lpNorm<Eigen::Infinity>() < 1e-12) break;
  }
  res.x.assign(x.data(), x.data() + n);
  res.value = fx;
}

}  // namespace ncc
