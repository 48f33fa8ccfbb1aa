// ncc: simulate scenario grids, analyze trial datasets, preview trends.

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ncc/analysis.hpp"
#include "ncc/config.hpp"
#include "ncc/datagen.hpp"
#include "ncc/io.hpp"
#include "ncc/simharness.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_usage = 2;

// Models reported by default: the rows of a single-dataset case-study table.
const std::vector<ncc::Estimator> default_models{
    ncc::Estimator::fixed_period,  ncc::Estimator::fixed_calendar, ncc::Estimator::mixed_calendar,
    ncc::Estimator::mixed_calendar_ar1, ncc::Estimator::spline_period, ncc::Estimator::spline_calendar,
    ncc::Estimator::pooled,        ncc::Estimator::separate,
};

unsigned default_threads() {
  if (const char* env = std::getenv("NCC_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid NCC_THREADS='" << env << "'\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

// Writes to `path`, or stdout when empty or "-".
template <typename Body>
void with_output(const std::string& path, Body&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  body(out);
  if (!out) throw std::runtime_error("error writing " + path);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  bool json = false;
  std::optional<int> reps;
  std::optional<long long> seed;
  unsigned threads = 0;
  bool print_config = false;
  bool quiet = false;
};

int run_simulate(const SimulateArgs& a) {
  ncc::GridSpec g = ncc::load_run_config(a.config);
  if (a.reps) {
    if (*a.reps < 1) throw ncc::ConfigError("--reps must be >= 1");
    g.replicates = *a.reps;
  }
  if (a.seed) {
    if (*a.seed < 0) throw ncc::ConfigError("--seed must be >= 0");
    g.seed = static_cast<std::uint64_t>(*a.seed);
  }
  g.validate();
  if (a.print_config) {
    std::cout << ncc::to_json(g).dump(2) << '\n';
    return exit_ok;
  }
  ncc::RunOptions opt;
  opt.threads = a.threads;
  const auto rows = ncc::run_grid(g, opt, [&](std::size_t c, std::size_t n, const ncc::Scenario& s,
                                              const ncc::OperatingCharacteristics& oc) {
    if (a.quiet) return;
    std::ostringstream line;
    line << "[" << c + 1 << "/" << n << "] " << ncc::to_string(s.trend.pattern)
         << " d=" << s.config.entry_spacing << " " << ncc::to_string(s.hypothesis);
    if (!s.trend.lambda.empty()) line << " lambda_M=" << ncc::format_double(s.trend.lambda[static_cast<std::size_t>(s.config.evaluated_arm)]);
    for (const auto& e : oc.estimators) {
      line << "  " << e.estimator;
      if (e.c_length) line << "(c=" << ncc::format_double(*e.c_length) << ")";
      line << "=" << std::fixed << std::setprecision(3) << e.reject_rate << std::defaultfloat;
      if (e.failures) line << "[" << e.failures << " failed]";
    }
    std::cerr << line.str() << '\n';
  });
  const bool json = a.json || ends_with(a.out, ".json");
  with_output(a.out, [&](std::ostream& out) {
    if (json)
      out << ncc::grid_to_json(rows).dump(2) << '\n';
    else
      ncc::write_grid_csv(out, rows);
  });
  return exit_ok;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string data;
  int arm = 0;
  std::vector<std::string> models;
  std::optional<double> c_length;
  double alpha = 0.025;
  std::string sided = "one_greater";
  int degree = 3;
  std::string out;
  bool json = false;
};

std::pair<std::string, std::string> table_labels(const ncc::ModelSpec& m) {
  using E = ncc::Estimator;
  const std::string cal = m.c_length ? "Calendar time (c=" + ncc::format_double(*m.c_length) + ")" : "Calendar time";
  switch (m.estimator) {
    case E::fixed_period: return {"Regression model", "Period"};
    case E::fixed_calendar: return {"Regression model", cal};
    case E::spline_period: return {"Spline regression (q=" + std::to_string(m.spline_degree) + ")", "Period knots"};
    case E::spline_calendar: return {"Spline regression (q=" + std::to_string(m.spline_degree) + ")", cal + " knots"};
    case E::mixed_period: return {"Mixed model", "Period"};
    case E::mixed_calendar: return {"Mixed model", cal};
    case E::mixed_period_ar1: return {"Mixed model, AR(1)", "Period"};
    case E::mixed_calendar_ar1: return {"Mixed model, AR(1)", cal};
    case E::mixedint_period: return {"Mixed model, interaction", "Period"};
    case E::mixedint_calendar: return {"Mixed model, interaction", cal};
    case E::pooled: return {"Pooled analysis", "-"};
    case E::separate: return {"Separate analysis", "-"};
  }
  return {"?", "?"};
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string p_value_text(double p) {
  if (p < 0.0001) return "<0.0001";
  return fixed(p, 4);
}

int run_analyze(const AnalyzeArgs& a) {
  std::vector<ncc::Estimator> estimators;
  const auto names = split_list(a.models);
  if (names.empty() || (names.size() == 1 && names[0] == "default")) {
    estimators = default_models;
  } else if (names.size() == 1 && names[0] == "all") {
    estimators.assign(ncc::all_estimators.begin(), ncc::all_estimators.end());
  } else {
    for (const auto& n : names) estimators.push_back(ncc::parse_estimator(n));
  }
  const ncc::Sided sided = ncc::parse_sided(a.sided);
  std::vector<ncc::ModelSpec> specs;
  for (auto e : estimators) {
    ncc::ModelSpec m{e, std::nullopt, a.degree, a.alpha, sided};
    if (ncc::uses_calendar(e)) {
      if (!a.c_length)
        throw ncc::ConfigError(std::string(ncc::to_string(e)) +
                               " needs --c-length (calendar unit length in the units of the time column)");
      m.c_length = a.c_length;
    }
    m.validate();
    specs.push_back(m);
  }

  const auto dataset = ncc::dataset_from_records(ncc::read_dataset_csv(a.data));
  const ncc::ArmAnalysis analysis(dataset, a.arm);
  std::vector<ncc::FitResult> results;
  std::vector<ncc::ModelSpec> fitted;
  for (const auto& m : specs) {
    try {
      results.push_back(ncc::fit(analysis, m));
      fitted.push_back(m);
    } catch (const ncc::DegenerateFitError& e) {
      std::cerr << "warning: " << m.label() << " skipped: " << e.what() << '\n';
    } catch (const ncc::RankDeficientError& e) {
      std::cerr << "warning: " << m.label() << " skipped: " << e.what() << '\n';
    }
  }
  if (results.empty()) throw std::runtime_error("no model could be fitted");

  if (a.json) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : results) out.push_back(ncc::to_json(r));
    std::cout << out.dump(2) << '\n';
  } else {
    std::vector<std::array<std::string, 5>> table{{"Analysis approach", "Adjustment", "Effect estimate",
                                                   "Std. error", "p-value"}};
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto [approach, adjustment] = table_labels(fitted[i]);
      std::string approach_text = approach;
      if (results[i].diagnostics.fallback) approach_text += " [no random effects; OLS]";
      if (!results[i].diagnostics.converged) approach_text += " [not converged]";
      table.push_back({approach_text, adjustment, fixed(results[i].theta_hat, 4), fixed(results[i].se, 4),
                       p_value_text(sided == ncc::Sided::two ? results[i].p_two : results[i].p_one)});
    }
    std::array<std::size_t, 5> width{};
    for (const auto& row : table)
      for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
    std::cout << "Arm " << a.arm << ", " << (sided == ncc::Sided::two ? "two-sided" : "one-sided")
              << " p-values, alpha = " << ncc::format_double(a.alpha) << ", n = "
              << results.front().diagnostics.observations << " (of " << dataset.records.size() << ")\n";
    for (std::size_t r = 0; r < table.size(); ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        if (c < 2)
          std::cout << std::left << std::setw(static_cast<int>(width[c])) << table[r][c] << "  ";
        else
          std::cout << std::right << std::setw(static_cast<int>(width[c])) << table[r][c] << (c < 4 ? "  " : "");
      }
      std::cout << '\n';
    }
  }
  if (!a.out.empty()) {
    with_output(a.out, [&](std::ostream& out) {
      out << ncc::fit_csv_header << '\n';
      for (const auto& r : results) ncc::write_fit_csv_row(out, r);
    });
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------

struct PreviewArgs {
  std::string pattern;
  double lambda = 0.5;
  int total = 0;
  std::optional<double> turning_point;
  double cycles = 1.0;
  int arms = 4;
  int spacing = 250;
  std::string out;
};

int run_trend_preview(const PreviewArgs& a) {
  ncc::TrendSpec trend;
  trend.pattern = ncc::parse_trend_pattern(a.pattern);
  trend.lambda.assign(static_cast<std::size_t>(a.arms) + 1, a.lambda);
  trend.turning_point = a.turning_point;
  trend.cycles = a.cycles;
  if (a.total < 2) throw ncc::ConfigError("--N must be >= 2");
  if (a.arms < 1) throw ncc::ConfigError("--arms must be >= 1");
  if (a.spacing < 0) throw ncc::ConfigError("--spacing must be >= 0");
  trend.validate(a.arms);
  const auto N = static_cast<std::size_t>(a.total);
  const double turning = trend.pattern == ncc::TrendPattern::inverted_u ? trend.turning_point_for(N) : 0.0;
  with_output(a.out, [&](std::ostream& out) {
    out << "j,trend\n";
    for (int j = 1; j <= a.total; ++j) {
      // Arms entered by j under the d*(k-1)+1 entry schedule.
      const int entered = a.spacing == 0 ? a.arms : std::min(a.arms, (j - 1) / a.spacing + 1);
      const double f = ncc::trend_value(trend.pattern, j, a.lambda, static_cast<double>(N), turning, a.cycles, entered);
      out << j << ',' << ncc::format_double(f) << '\n';
    }
  });
  return exit_ok;
}

// ---------------------------------------------------------------------------

int run_validate(const std::string& path, bool print_config) {
  const auto g = ncc::load_run_config(path);
  if (print_config) {
    std::cout << ncc::to_json(g).dump(2) << '\n';
    return exit_ok;
  }
  const auto cells = ncc::grid_scenarios(g);
  std::size_t rows = 0;
  for (const auto& c : cells) rows += c.scenario.estimators.size();
  std::cout << path << ": ok (" << cells.size() << " data cells, " << rows << " result rows, " << g.replicates
            << " replicates each)\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Platform-trial simulation and analysis with non-concurrent controls"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ncc 0.1.0");

  SimulateArgs sim;
  sim.threads = default_threads();
  auto* simulate = app.add_subcommand("simulate", "Run a scenario grid and write operating characteristics");
  simulate->add_option("--config", sim.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Output file (.csv or .json); stdout if omitted");
  simulate->add_flag("--json", sim.json, "Write JSON instead of CSV");
  simulate->add_option("--reps", sim.reps, "Override simulation.replicates");
  simulate->add_option("--seed", sim.seed, "Override simulation.seed");
  simulate->add_option("--threads", sim.threads, "Worker threads (default: NCC_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  simulate->add_flag("--print-config", sim.print_config, "Print the canonical configuration and exit");
  simulate->add_flag("--quiet", sim.quiet, "Suppress per-cell progress on stderr");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Fit models to a trial dataset (CSV j,arm,time,response)");
  analyze->add_option("--data", an.data, "Dataset CSV")->required();
  analyze->add_option("--arm", an.arm, "Evaluated arm M")->required();
  analyze->add_option("--models", an.models,
                      "Comma-separated estimators, 'default' (case-study set) or 'all'");
  analyze->add_option("--c-length", an.c_length, "Calendar unit length (time-column units)");
  analyze->add_option("--alpha", an.alpha, "Significance level");
  analyze->add_option("--sided", an.sided, "one_greater or two");
  analyze->add_option("--degree", an.degree, "Spline degree (1-3)");
  analyze->add_option("--out", an.out, "Also write full results as CSV");
  analyze->add_flag("--json", an.json, "Print JSON records instead of the table");

  PreviewArgs pv;
  auto* preview = app.add_subcommand("trend-preview", "Print the trend f(j) for j = 1..N");
  preview->add_option("--pattern", pv.pattern, "none, linear, stepwise, inverted_u or seasonal")->required();
  preview->add_option("--lambda", pv.lambda, "Trend strength");
  preview->add_option("--N", pv.total, "Trial size")->required();
  preview->add_option("--turning-point", pv.turning_point, "Inverted-U turning point (default N/2)");
  preview->add_option("--cycles", pv.cycles, "Seasonal cycles over the trial");
  preview->add_option("--arms", pv.arms, "Experimental arms (stepwise)");
  preview->add_option("--spacing", pv.spacing, "Patients between arm entries (stepwise)");
  preview->add_option("--out", pv.out, "Output CSV; stdout if omitted");

  std::string validate_path;
  bool validate_print = false;
  auto* validate = app.add_subcommand("validate", "Check a run configuration");
  validate->add_option("--config", validate_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  validate->add_flag("--print-config", validate_print, "Print the canonical configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*analyze) return run_analyze(an);
    if (*preview) return run_trend_preview(pv);
    if (*validate) return run_validate(validate_path, validate_print);
  } catch (const ncc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ncc::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_usage;
}
