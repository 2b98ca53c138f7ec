#include "mfaimd/validation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfaimd/error.hpp"

namespace mfaimd {
namespace {

constexpr double kDefaultBox = 10.0;

struct Checker {
  ValidationReport& report;

  void error(std::string field, std::string msg) {
    report.errors.push_back({std::move(field), std::move(msg)});
  }
  void warn(std::string field, std::string msg) {
    report.warnings.push_back({std::move(field), std::move(msg)});
  }

  void check_family(const RateFamily& f, std::size_t nodes, const std::string& where) {
    for (const auto& [name, value] : f.parameters()) {
      if (!std::isfinite(value) || value < 0.0)
        error(where + ".params." + name, "must be finite and nonnegative, got " + fmt(value));
    }
    const std::size_t n = f.coefficient_count();
    if (n != 0 && n != nodes)
      error(where + ".params", "per-node coefficients must have length " + std::to_string(nodes) +
                                   ", got " + std::to_string(n));
    if (const auto* rf = std::get_if<family::ReciprocalLoadAffine>(&f.form()))
      if (!(rf->tau > 0.0)) error(where + ".params.tau", "must be positive");
  }

  static std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  }
};

// Smallest value of f(w, u) over u in the box; families are monotone in u.
double min_over_box(const RateFamily& f, double w, std::span<const double> lo,
                    std::span<const double> hi) {
  return std::min(f(w, lo), f(w, hi));
}

double min_inf_window(const RateFamily& f, std::span<const double> lo, std::span<const double> hi) {
  return std::min(f.inf_over_window(lo), f.inf_over_window(hi));
}

}  // namespace

std::string to_string(ConditionBranch branch) {
  switch (branch) {
    case ConditionBranch::LipschitzExponentialMoment:
      return "lipschitz-exponential-moment";
    case ConditionBranch::WindowProportionalGaussian:
      return "window-proportional-gaussian-moment";
  }
  return "unknown";
}

ValidationReport validate_config(const ModelConfig& cfg) {
  ValidationReport report;
  Checker chk{report};
  const std::size_t J = cfg.nodes;
  const std::size_t K = cfg.class_count();

  if (J == 0) chk.error("nodes", "must be at least 1");
  if (K == 0) chk.error("classes", "at least one class is required");
  if (cfg.allocation.nodes() != J || cfg.allocation.classes() != K) {
    chk.error("allocation", "must be " + std::to_string(J) + " x " + std::to_string(K));
  } else {
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t k = 0; k < K; ++k) {
        const double a = cfg.allocation(j, k);
        if (!std::isfinite(a) || a < 0.0)
          chk.error("allocation[" + std::to_string(j) + "][" + std::to_string(k) + "]",
                    "must be finite and nonnegative");
      }
    for (std::size_t k = 0; k < K; ++k) {
      bool any = false;
      for (std::size_t j = 0; j < J; ++j) any = any || cfg.allocation(j, k) > 0.0;
      if (!any)
        chk.error("allocation", "class " + std::to_string(k) + " has no nonzero entry");
    }
  }

  if (cfg.proportions.size() != K) {
    chk.error("proportions", "expected " + std::to_string(K) + " entries");
  } else {
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double p = cfg.proportions[k];
      if (!std::isfinite(p) || p < 0.0)
        chk.error("proportions[" + std::to_string(k) + "]", "must be finite and nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      chk.error("proportions", "must sum to 1, got " + Checker::fmt(sum));
  }

  std::vector<double> lo(J, 0.0);
  std::vector<double> hi(J, kDefaultBox);
  if (!cfg.load_box.empty()) {
    if (cfg.load_box.size() != J) {
      chk.error("load_box", "expected " + std::to_string(J) + " entries");
    } else {
      for (std::size_t j = 0; j < J; ++j) {
        if (!std::isfinite(cfg.load_box[j]) || cfg.load_box[j] < 0.0)
          chk.error("load_box[" + std::to_string(j) + "]", "must be finite and nonnegative");
        hi[j] = cfg.load_box[j];
      }
    }
  }

  for (std::size_t k = 0; k < K; ++k) {
    const ClassParams& c = cfg.classes[k];
    const std::string where = "classes[" + std::to_string(k) + "]";
    chk.check_family(c.lambda, J, where + ".lambda");
    chk.check_family(c.mu, J, where + ".mu");
    chk.check_family(c.a, J, where + ".a");
    chk.check_family(c.b, J, where + ".b");
    if (c.lambda.depends_on_window())
      chk.error(where + ".lambda", "activation rate is a function of the load only");
    if (!(c.r >= 0.0 && c.r <= 1.0))
      chk.error(where + ".r", "must lie in [0, 1], got " + Checker::fmt(c.r));
    if (auto problem = c.alpha.check()) chk.error(where + ".alpha", *problem);
    if (!(c.initial_on_fraction >= 0.0 && c.initial_on_fraction <= 1.0))
      chk.error(where + ".initial_on_fraction", "must lie in [0, 1]");
    if (c.a_bound && (!std::isfinite(*c.a_bound) || *c.a_bound < 0.0))
      chk.error(where + ".a.bound", "must be finite and nonnegative");
    if (!c.growth_bound())
      chk.error(where + ".a", "growth speed must be bounded; declare \"bound\" for this family");

    ClassDiagnostics d;
    const bool quad_b = c.b.depends_on_window();
    const bool quad_mu = c.mu.depends_on_window();
    d.branch = (quad_b || quad_mu) ? ConditionBranch::WindowProportionalGaussian
                                   : ConditionBranch::LipschitzExponentialMoment;
    if (quad_b != quad_mu) {
      const RateFamily& other = quad_b ? c.mu : c.b;
      if (other.constant_value().value_or(1.0) != 0.0)
        chk.warn(where, std::string("mixed ") + (quad_b ? "b" : "mu") +
                            " window-proportional form with a Lipschitz " + (quad_b ? "mu" : "b") +
                            "; classified under the Gaussian-moment branch");
    }
    if (c.a.depends_on_window())
      chk.warn(where + ".a", "growth speed depends on the window and is not globally Lipschitz");

    d.growth_bounded = c.growth_bound().has_value();
    d.growth_positive = min_inf_window(c.a, lo, hi) > 0.0;
    d.activation_positive = min_over_box(c.lambda, 0.0, lo, hi) > 0.0;
    d.finite_mass_guaranteed = min_inf_window(c.mu, lo, hi) > 0.0;
    if (c.b.depends_on_window())
      d.loss_recurrent = min_over_box(c.b, 1.0, lo, hi) > 0.0;
    else
      d.loss_recurrent = min_over_box(c.b, 0.0, lo, hi) > 0.0;

    if (!d.growth_positive)
      chk.warn(where + ".a", "inf over windows of a(w, u) is 0 somewhere on the load box");
    if (!d.loss_recurrent)
      chk.warn(where + ".b",
               "loss rate not bounded below for large windows; the permanent process may not be "
               "positive recurrent");
    if (!d.activation_positive)
      chk.warn(where + ".lambda", "activation rate vanishes somewhere on the load box");
    if (!d.finite_mass_guaranteed)
      chk.warn(where + ".mu",
               "inf over windows of mu(w, u) is 0; a finite stationary mass is not guaranteed");
    report.classes.push_back(d);
  }
  return report;
}

void require_valid(const ModelConfig& cfg) {
  const ValidationReport report = validate_config(cfg);
  if (!report.ok()) throw ConfigError(report.errors.front().field, report.errors.front().message);
}

}  // namespace mfaimd
