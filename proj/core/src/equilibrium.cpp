#include "mfaimd/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mfaimd/error.hpp"
#include "mfaimd/mckean.hpp"
#include "mfaimd/parallel.hpp"
#include "mfaimd/rng.hpp"
#include "mfaimd/stats.hpp"
#include "mfaimd/validation.hpp"
#include "thinning_engine.hpp"

namespace mfaimd::equilibrium {
namespace {

/// The family with the load fixed at u; same values, no load dependence.
RateFamily frozen_at(const RateFamily& f, std::span<const double> u) {
  if (!f.depends_on_load()) return f;
  if (f.depends_on_window()) return RateFamily::window_times(f(1.0, u));
  return RateFamily::constant(f(0.0, u));
}

ClassParams frozen_class(const ClassParams& c, std::span<const double> u) {
  ClassParams out = c;
  out.lambda = frozen_at(c.lambda, u);
  out.mu = frozen_at(c.mu, u);
  out.a = frozen_at(c.a, u);
  out.b = frozen_at(c.b, u);
  if (!out.a_bound) out.a_bound = c.growth_bound();
  return out;
}

void check_class_and_load(const ModelConfig& cfg, std::size_t k, std::span<const double> u) {
  require_valid(cfg);
  if (k >= cfg.class_count()) throw ConfigError("class", "index out of range");
  if (u.size() != cfg.nodes)
    throw ConfigError("u", "expected " + std::to_string(cfg.nodes) + " load entries");
  for (double x : u)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("u", "loads must be finite and >= 0");
}

void check_hazard_options(const HazardOptions& o) {
  if (o.replicas == 0) throw ConfigError("replicas", "must be >= 1");
  if (!(o.hazard_cap > 0.0)) throw ConfigError("hmax", "must be positive");
  if (!(o.time_cap > 0.0)) throw ConfigError("tmax", "must be positive");
  if (!(o.quadrature_step > 0.0)) throw ConfigError("quadrature_step", "must be positive");
}

/// Killed-path integrals G_i = integral of V^i exp(-H) dt, i = 0..degree,
/// for every replica.
struct KilledPaths {
  std::size_t degree = 0;
  std::size_t replicas = 0;
  std::vector<double> moments;  // [path * (degree + 1) + i]
  std::vector<double> end_time;
  std::vector<double> end_survival;  // exp(-H) at the truncation time
  bool possibly_infinite = false;
  std::vector<std::vector<StationaryLaw::Weighted>> samples;

  double moment(std::size_t path, std::size_t i) const { return moments[path * (degree + 1) + i]; }
};

KilledPaths run_killed_paths(const ModelConfig& cfg, std::size_t k, std::span<const double> u,
                             const HazardOptions& opts, std::size_t degree, bool store_samples) {
  check_class_and_load(cfg, k, u);
  check_hazard_options(opts);
  const ClassParams c = frozen_class(cfg.classes[k], u);
  const double abar = c.growth_bound().value_or(0.0);
  const auto a_const = c.a.constant_value();
  const std::size_t m = degree + 1;
  const std::size_t dim = 2 + m;  // V, H, G_0..G_degree

  KilledPaths out;
  out.degree = degree;
  out.replicas = opts.replicas;
  out.moments.assign(opts.replicas * m, 0.0);
  out.end_time.assign(opts.replicas, 0.0);
  out.end_survival.assign(opts.replicas, 0.0);
  if (store_samples) out.samples.resize(opts.replicas);
  std::vector<std::uint8_t> growing(opts.replicas, 0);

  parallel_for(opts.replicas, opts.workers, [&](std::size_t rep) {
    auto init_rng = CounterRng::for_stream({opts.seed, rep, k, 0, Channel::Init});
    auto loss_rng = CounterRng::for_stream({opts.seed, rep, k, 0, Channel::Loss});
    std::vector<double> y(dim, 0.0), k1(dim), k2(dim), k3(dim), k4(dim), ys(dim);
    y[0] = c.alpha.sample(init_rng);

    auto deriv = [&](const std::vector<double>& s, std::vector<double>& d) {
      const double v = std::max(s[0], 0.0);
      d[0] = a_const ? std::min(*a_const, abar) : std::min(c.a(v, {}), abar);
      d[1] = c.mu(v, {});
      const double surv = std::exp(-s[1]);
      double pw = 1.0;
      for (std::size_t i = 0; i < m; ++i, pw *= v) d[2 + i] = pw * surv;
    };

    double t = 0.0;
    double clock = 0.0;
    double threshold = loss_rng.exponential();
    const double check_time = 0.9 * opts.time_cap;
    std::vector<double> g_check;
    auto* samples = store_samples ? &out.samples[rep] : nullptr;

    while (y[1] < opts.hazard_cap && t < opts.time_cap) {
      const double h = std::min(opts.quadrature_step, opts.time_cap - t);
      const double bound = c.b.upper_bound(y[0] + abar * h, {}, {});
      if (!std::isfinite(bound)) throw NumericalError("loss majorant overflow");
      double step = h;
      bool candidate = false;
      if (bound > 0.0) {
        const double dt = (threshold - clock) / bound;
        if (dt < h) {
          step = std::max(dt, 0.0);
          candidate = true;
        }
      }
      const double g0_before = y[2];
      const double v_before = y[0];
      if (step > 0.0) {
        deriv(y, k1);
        for (std::size_t i = 0; i < dim; ++i) ys[i] = y[i] + 0.5 * step * k1[i];
        deriv(ys, k2);
        for (std::size_t i = 0; i < dim; ++i) ys[i] = y[i] + 0.5 * step * k2[i];
        deriv(ys, k3);
        for (std::size_t i = 0; i < dim; ++i) ys[i] = y[i] + step * k3[i];
        deriv(ys, k4);
        for (std::size_t i = 0; i < dim; ++i)
          y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!std::isfinite(y[0]) || !std::isfinite(y[1]))
          throw NumericalError("non-finite permanent-process state");
      }
      clock += bound * step;
      t += step;
      if (samples && step > 0.0)
        samples->push_back({0.5 * (v_before + y[0]), y[2] - g0_before});
      if (g_check.empty() && t >= check_time) g_check.assign(y.begin() + 2, y.end());
      if (candidate) {
        clock = threshold;
        const double u01 = loss_rng.uniform();
        threshold += loss_rng.exponential();
        if (u01 * bound <= c.b(y[0], {})) y[0] *= c.r;
      }
    }

    for (std::size_t i = 0; i < m; ++i) out.moments[rep * m + i] = y[2 + i];
    out.end_time[rep] = t;
    out.end_survival[rep] = std::exp(-y[1]);
    if (y[1] < opts.hazard_cap && !g_check.empty()) {
      for (std::size_t i = 0; i < m; ++i) {
        const double total = std::abs(y[2 + i]);
        if (y[2 + i] - g_check[i] > 1e-6 * std::max(total, 1e-300)) growing[rep] = 1;
      }
    }
  });
  out.possibly_infinite = std::any_of(growing.begin(), growing.end(), [](auto g) { return g; });
  return out;
}

/// C with |p(x)| <= C mu(x) for all x >= 0, when such a C exists.
std::optional<double> domination_constant(const Polynomial& p, const RateFamily& mu) {
  const std::size_t deg = p.degree();
  if (!mu.depends_on_window()) {
    const double m0 = mu(0.0, {});
    if (deg == 0 && m0 > 0.0) return std::abs(p.coeff.empty() ? 0.0 : p.coeff[0]) / m0;
    return std::nullopt;
  }
  const double slope = mu(1.0, {});
  if (deg <= 1 && slope > 0.0 && (p.coeff.empty() || p.coeff[0] == 0.0))
    return std::abs(p.coeff.size() > 1 ? p.coeff[1] : 0.0) / slope;
  return std::nullopt;
}

std::vector<double> per_path_values(const KilledPaths& kp, const Polynomial& p) {
  std::vector<double> v(kp.replicas, 0.0);
  for (std::size_t r = 0; r < kp.replicas; ++r)
    for (std::size_t i = 0; i < p.coeff.size(); ++i) v[r] += p.coeff[i] * kp.moment(r, i);
  return v;
}

/// e^{x^2} erfc(x) for x >= 0.
double scaled_erfc(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  const double x2 = x * x;
  return 1.0 / (x * std::sqrt(std::numbers::pi)) * (1.0 - 0.5 / x2 + 0.75 / (x2 * x2));
}

double sup_distance(std::span<const double> x, std::span<const double> y) {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - y[i]));
  return d;
}

struct MapEvaluation {
  std::vector<double> image;
  std::vector<double> image_error;
  std::vector<ClassEquilibrium> classes;
};

MapEvaluation evaluate_map(const ModelConfig& cfg, std::span<const double> u,
                           const HazardOptions& opts) {
  MapEvaluation ev;
  ev.image.assign(cfg.nodes, 0.0);
  std::vector<double> var(cfg.nodes, 0.0);
  for (std::size_t k = 0; k < cfg.class_count(); ++k) {
    const KilledPaths kp = run_killed_paths(cfg, k, u, opts, 1, false);
    if (kp.possibly_infinite)
      throw InfiniteMassError("class " + std::to_string(k) +
                              ": killed-process integral still growing at the time cap");
    const double lambda = cfg.classes[k].lambda(0.0, u);
    const auto z = per_path_values(kp, Polynomial::one());
    const auto n = per_path_values(kp, Polynomial::identity());
    const auto ze = stats::mean_and_error(z);
    const auto ne = stats::mean_and_error(n);
    const double denom = 1.0 + lambda * ze.mean;
    const double value = lambda * ne.mean / denom;
    // delta method for lambda N / (1 + lambda Z)
    const double gn = lambda / denom;
    const double gz = -lambda * value / denom;
    const double M = static_cast<double>(kp.replicas);
    const double cov = kp.replicas > 1 ? stats::sample_covariance(n, z) : 0.0;
    const double se2 = (gn * gn * ne.std_error * ne.std_error + gz * gz * ze.std_error * ze.std_error +
                        2.0 * gn * gz * cov / M);
    ClassEquilibrium ce;
    ce.normalization = ze.mean;
    ce.normalization_error = ze.std_error;
    ce.activation_rate = lambda;
    ce.on_probability = lambda * ze.mean / denom;
    ce.mean_window = value;
    ce.mean_window_error = std::sqrt(std::max(se2, 0.0));
    ev.classes.push_back(ce);
    for (std::size_t j = 0; j < cfg.nodes; ++j) {
      const double w = cfg.allocation(j, k) * cfg.proportions[k];
      ev.image[j] += w * value;
      var[j] += w * w * ce.mean_window_error * ce.mean_window_error;
    }
  }
  ev.image_error.resize(cfg.nodes);
  for (std::size_t j = 0; j < cfg.nodes; ++j) ev.image_error[j] = std::sqrt(var[j]);
  return ev;
}

}  // namespace

double Polynomial::operator()(double x) const noexcept {
  double s = 0.0;
  for (auto it = coeff.rbegin(); it != coeff.rend(); ++it) s = s * x + *it;
  return s;
}

std::size_t Polynomial::degree() const noexcept {
  std::size_t d = coeff.size();
  while (d > 1 && coeff[d - 1] == 0.0) --d;
  return d == 0 ? 0 : d - 1;
}

Path simulate_permanent(const ModelConfig& cfg, std::size_t k, std::span<const double> u,
                        const PermanentOptions& opts) {
  check_class_and_load(cfg, k, u);
  if (!(opts.horizon > 0.0) || !std::isfinite(opts.horizon))
    throw ConfigError("horizon", "must be positive and finite");
  ModelConfig local = cfg;
  ClassParams& c = local.classes[k];
  c = frozen_class(cfg.classes[k], u);
  c.lambda = RateFamily::constant(0.0);
  c.mu = RateFamily::constant(0.0);

  double v0 = 0.0;
  if (opts.initial) {
    if (!(*opts.initial >= 0.0)) throw ConfigError("initial", "must be >= 0");
    v0 = *opts.initial;
  } else {
    auto rng = CounterRng::for_stream({opts.seed, opts.replica, k, 0, Channel::Init});
    v0 = c.alpha.sample(rng);
  }
  const auto load = mckean::LoadTrajectory::constant(opts.horizon, 1, u);
  detail::ThinningEngine::Params p;
  p.cfg = &local;
  p.exogenous = &load;
  p.micro_step_factor = opts.micro_step_factor;
  p.max_micro_step = opts.max_micro_step;
  p.record_paths = true;
  p.seed = opts.seed;
  p.replica = opts.replica;
  std::vector<std::vector<UserState>> states(local.class_count());
  states[k].push_back(UserState::on(v0));
  detail::ThinningEngine engine(p, states);
  engine.advance_to(opts.horizon);
  engine.finish();
  return std::move(engine.paths()[0]);
}

std::vector<HazardFunctionalEstimate> hazard_functional(const ModelConfig& cfg, std::size_t k,
                                                        std::span<const double> u,
                                                        const std::vector<Polynomial>& fs,
                                                        const HazardOptions& opts) {
  std::size_t degree = 0;
  for (const auto& f : fs) degree = std::max(degree, f.degree());
  const KilledPaths kp = run_killed_paths(cfg, k, u, opts, degree, false);
  const RateFamily mu = frozen_at(cfg.classes[k].mu, u);

  double mean_end = 0.0;
  double max_end = 0.0;
  double mean_survival = 0.0;
  for (std::size_t r = 0; r < kp.replicas; ++r) {
    mean_end += kp.end_time[r];
    max_end = std::max(max_end, kp.end_time[r]);
    mean_survival += kp.end_survival[r];
  }
  mean_end /= static_cast<double>(kp.replicas);
  mean_survival /= static_cast<double>(kp.replicas);

  std::vector<HazardFunctionalEstimate> out;
  out.reserve(fs.size());
  for (const auto& f : fs) {
    Polynomial trimmed = f;
    trimmed.coeff.resize(std::min(f.coeff.size(), degree + 1));
    const auto vals = per_path_values(kp, trimmed);
    const auto est = stats::mean_and_error(vals);
    HazardFunctionalEstimate h;
    h.value = est.mean;
    h.std_error = est.std_error;
    h.truncation_time = mean_end;
    h.max_truncation_time = max_end;
    h.replicas = kp.replicas;
    if (const auto C = domination_constant(trimmed, mu)) h.bias_bound = *C * mean_survival;
    h.possibly_infinite = kp.possibly_infinite;
    out.push_back(h);
  }
  return out;
}

double StationaryLaw::normalization_error() const noexcept {
  if (replicas_ < 2) return 0.0;
  std::vector<double> z(replicas_);
  for (std::size_t r = 0; r < replicas_; ++r) z[r] = moments_[r * (degree_ + 1)];
  return stats::mean_and_error(z).std_error;
}

StationaryLaw::Expectation StationaryLaw::expectation(double f_off, const Polynomial& p) const {
  if (p.degree() > degree_)
    throw ConfigError("f", "polynomial degree exceeds the stored moments");
  std::vector<double> n(replicas_, 0.0), z(replicas_);
  for (std::size_t r = 0; r < replicas_; ++r) {
    z[r] = moments_[r * (degree_ + 1)];
    for (std::size_t i = 0; i < p.coeff.size() && i <= degree_; ++i)
      n[r] += p.coeff[i] * moments_[r * (degree_ + 1) + i];
  }
  const auto ne = stats::mean_and_error(n);
  const double denom = 1.0 + lambda_ * z_;
  Expectation e;
  e.value = (f_off + lambda_ * ne.mean) / denom;
  if (replicas_ > 1) {
    const double gn = lambda_ / denom;
    const double gz = -lambda_ * e.value / denom;
    const double M = static_cast<double>(replicas_);
    const double var = gn * gn * stats::sample_variance(n) + gz * gz * stats::sample_variance(z) +
                       2.0 * gn * gz * stats::sample_covariance(n, z);
    e.std_error = std::sqrt(std::max(var, 0.0) / M);
  }
  return e;
}

double StationaryLaw::expectation(const std::function<double(const UserState&)>& f) const {
  if (samples_.empty() && z_ > 0.0)
    throw ConfigError("samples", "stationary law was built without path samples");
  double on = 0.0;
  for (const auto& s : samples_) on += s.weight * f(UserState::on(s.window));
  return (f(UserState::off()) + lambda_ * on) / (1.0 + lambda_ * z_);
}

StationaryLaw stationary_law(const ModelConfig& cfg, std::size_t k, std::span<const double> u,
                             const HazardOptions& opts, std::size_t max_degree,
                             bool store_samples) {
  check_class_and_load(cfg, k, u);
  const double lambda = cfg.classes[k].lambda(0.0, u);
  if (!(lambda > 0.0)) throw ConfigError("classes[" + std::to_string(k) + "].lambda", "is 0 at u");
  KilledPaths kp = run_killed_paths(cfg, k, u, opts, max_degree, store_samples);
  if (kp.possibly_infinite)
    throw InfiniteMassError("class " + std::to_string(k) +
                            ": killed-process integral still growing at the time cap");
  StationaryLaw law;
  law.lambda_ = lambda;
  law.replicas_ = kp.replicas;
  law.degree_ = max_degree;
  law.moments_ = std::move(kp.moments);
  double z = 0.0;
  for (std::size_t r = 0; r < law.replicas_; ++r) z += law.moments_[r * (max_degree + 1)];
  law.z_ = z / static_cast<double>(law.replicas_);
  if (store_samples) {
    const double inv = 1.0 / static_cast<double>(law.replicas_);
    for (auto& path : kp.samples)
      for (auto& s : path) law.samples_.push_back({s.window, s.weight * inv});
  }
  return law;
}

std::vector<double> fixed_point_map(const ModelConfig& cfg, std::span<const double> u,
                                    const HazardOptions& opts) {
  return evaluate_map(cfg, u, opts).image;
}

FixedPointReport fixed_point_solve(const ModelConfig& cfg, const FixedPointOptions& opts) {
  require_valid(cfg);
  if (!(opts.tolerance > 0.0)) throw ConfigError("tol", "must be positive");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ConfigError("damping", "must lie in (0, 1]");
  if (opts.max_iterations == 0) throw ConfigError("max_iter", "must be >= 1");
  if (opts.starts == 0) throw ConfigError("starts", "must be >= 1");
  const std::size_t J = cfg.nodes;
  std::vector<double> first(J, 0.0);
  if (opts.initial_guess) {
    if (opts.initial_guess->size() != J) throw ConfigError("u0", "expected " + std::to_string(J) + " entries");
    first = *opts.initial_guess;
    for (double x : first)
      if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("u0", "entries must be finite and >= 0");
  }

  // Random starts are uniform in [0, B_j], B the a-priori load bound at t = 1.
  const auto box = apriori_load_bound(cfg, {}, 1.0);
  std::vector<std::vector<double>> initial{first};
  for (std::size_t s = 1; s < opts.starts; ++s) {
    auto rng = CounterRng::for_stream({opts.hazard.seed, s, 0, 0, Channel::Init});
    std::vector<double> u0(J);
    for (std::size_t j = 0; j < J; ++j) u0[j] = rng.uniform() * box[j];
    initial.push_back(std::move(u0));
  }

  FixedPointReport report;
  std::optional<std::size_t> chosen;
  try {
    for (std::size_t s = 0; s < initial.size(); ++s) {
      StartOutcome outcome;
      outcome.initial = initial[s];
      std::vector<double> u = initial[s];
      std::vector<double> previous;
      for (std::size_t m = 0;; ++m) {
        const auto image = fixed_point_map(cfg, u, opts.hazard);
        const double residual = sup_distance(u, image);
        report.trace.push_back({s, m, u, image, residual});
        outcome.residual = residual;
        outcome.iterations = m;
        if (residual <= opts.tolerance) {
          outcome.converged = true;
          break;
        }
        if (m == opts.max_iterations) break;
        std::vector<double> next(J);
        for (std::size_t j = 0; j < J; ++j) {
          next[j] = (1.0 - opts.damping) * u[j] + opts.damping * image[j];
          if (!std::isfinite(next[j])) throw NumericalError("fixed-point iterate is not finite");
        }
        if (!previous.empty() && sup_distance(next, previous) <= opts.tolerance &&
            sup_distance(next, u) > opts.tolerance) {
          outcome.oscillating = true;
          break;
        }
        previous = std::move(u);
        u = std::move(next);
      }
      outcome.limit = u;
      if (outcome.converged && !chosen) chosen = s;
      report.starts.push_back(std::move(outcome));
    }
  } catch (const InfiniteMassError& e) {
    report.possibly_infinite = true;
    report.diagnostic = e.what();
    return report;
  }

  for (const auto& o : report.starts) {
    if (!o.converged) continue;
    const bool known = std::any_of(
        report.distinct_limits.begin(), report.distinct_limits.end(),
        [&](const auto& l) { return sup_distance(l, o.limit) <= 10.0 * opts.tolerance; });
    if (!known) report.distinct_limits.push_back(o.limit);
  }

  const StartOutcome& best = report.starts[chosen.value_or(0)];
  report.converged = best.converged;
  report.oscillating = best.oscillating;
  report.iterations = best.iterations;
  report.residual = best.residual;
  report.u_star = best.limit;
  const auto ev = evaluate_map(cfg, report.u_star, opts.hazard);
  report.u_star_error = ev.image_error;
  report.classes = ev.classes;
  if (!report.converged)
    report.diagnostic = best.oscillating ? "damped iteration oscillates with period 2"
                                         : "no start converged within max_iter";
  return report;
}

std::optional<ClosedForm> closed_form_fixed_point(const ModelConfig& cfg) {
  ClosedForm out;
  out.u_star.assign(cfg.nodes, 0.0);
  for (std::size_t k = 0; k < cfg.class_count(); ++k) {
    const ClassParams& c = cfg.classes[k];
    const auto b = c.b.constant_value();
    const auto b_lin = c.b.linear_window_coefficient();
    if (!((b && *b == 0.0) || (b_lin && *b_lin == 0.0))) return std::nullopt;
    const auto a_raw = c.a.constant_value();
    const auto lambda = c.lambda.constant_value();
    const auto* dirac = std::get_if<law::Dirac>(&c.alpha.form());
    if (!a_raw || !lambda || !dirac || !(*lambda > 0.0)) return std::nullopt;
    const double a = std::min(*a_raw, c.growth_bound().value_or(*a_raw));
    const double w0 = dirac->w0;

    double z = 0.0;
    double num = 0.0;
    if (const auto mu = c.mu.constant_value()) {
      if (!(*mu > 0.0)) return std::nullopt;
      z = 1.0 / *mu;
      num = w0 / *mu + a / (*mu * *mu);
    } else if (const auto nu = c.mu.linear_window_coefficient()) {
      if (!(*nu > 0.0)) return std::nullopt;
      // H(t) = nu (w0 t + a t^2 / 2) and V = H' / nu, so the numerator is 1/nu.
      num = 1.0 / *nu;
      if (a > 0.0) {
        z = std::sqrt(std::numbers::pi / (2.0 * *nu * a)) * scaled_erfc(w0 * std::sqrt(*nu / (2.0 * a)));
      } else if (w0 > 0.0) {
        z = 1.0 / (*nu * w0);
      } else {
        return std::nullopt;
      }
    } else {
      return std::nullopt;
    }
    out.normalization.push_back(z);
    out.numerator.push_back(num);
    const double per_user = *lambda / (1.0 + *lambda * z) * num;
    for (std::size_t j = 0; j < cfg.nodes; ++j)
      out.u_star[j] += cfg.allocation(j, k) * cfg.proportions[k] * per_user;
  }
  return out;
}

}  // namespace mfaimd::equilibrium
