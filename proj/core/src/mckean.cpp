#include "mfaimd/mckean.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfaimd/error.hpp"
#include "mfaimd/parallel.hpp"
#include "mfaimd/stats.hpp"
#include "mfaimd/validation.hpp"
#include "thinning_engine.hpp"

namespace mfaimd::mckean {
namespace {

void check_grid(double horizon, std::size_t intervals) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ConfigError("horizon", "must be positive and finite");
  if (intervals == 0) throw ConfigError("grid", "must be >= 1");
}

bool any_load_dependence(const ModelConfig& cfg) {
  return std::any_of(cfg.classes.begin(), cfg.classes.end(), [](const ClassParams& c) {
    return c.lambda.depends_on_load() || c.mu.depends_on_load() || c.a.depends_on_load() ||
           c.b.depends_on_load();
  });
}

UserState initial_state(const ModelConfig& cfg, std::size_t k, const SingleUserInit& init,
                        std::uint64_t seed, std::size_t replica) {
  if (init.state) return *init.state;
  if (!(init.on_fraction >= 0.0 && init.on_fraction <= 1.0))
    throw ConfigError("initial.on_fraction", "must lie in [0, 1]");
  auto rng = CounterRng::for_stream({seed, replica, k, 0, Channel::Init});
  if (init.on_fraction > 0.0 && rng.uniform() < init.on_fraction)
    return UserState::on((init.law ? *init.law : cfg.classes[k].alpha).sample(rng));
  return UserState::off();
}

detail::ThinningEngine make_engine(const ModelConfig& cfg, std::size_t k, const LoadTrajectory& u,
                                   const SingleUserInit& init, std::uint64_t seed,
                                   std::size_t replica, bool record_paths,
                                   double micro_step_factor, double max_micro_step) {
  detail::ThinningEngine::Params p;
  p.cfg = &cfg;
  p.exogenous = &u;
  p.micro_step_factor = micro_step_factor;
  p.max_micro_step = max_micro_step;
  p.record_paths = record_paths;
  p.seed = seed;
  p.replica = replica;
  std::vector<std::vector<UserState>> states(cfg.class_count());
  states[k].push_back(initial_state(cfg, k, init, seed, replica));
  return detail::ThinningEngine(p, states);
}

void check_frozen(const ModelConfig& cfg, std::size_t k, const LoadTrajectory& u,
                  std::size_t replicas) {
  require_valid(cfg);
  if (k >= cfg.class_count()) throw ConfigError("class", "index out of range");
  if (u.nodes() != cfg.nodes) throw ConfigError("load", "trajectory has the wrong number of nodes");
  if (replicas == 0) throw ConfigError("replicas", "must be >= 1");
}

}  // namespace

LoadTrajectory::LoadTrajectory(double horizon, std::size_t intervals, std::size_t nodes)
    : horizon_(horizon), intervals_(intervals), nodes_(nodes),
      values_((intervals + 1) * nodes, 0.0) {
  check_grid(horizon, intervals);
}

LoadTrajectory::LoadTrajectory(double horizon, std::size_t intervals, std::size_t nodes,
                               std::vector<double> values)
    : horizon_(horizon), intervals_(intervals), nodes_(nodes), values_(std::move(values)) {
  check_grid(horizon, intervals);
  if (values_.size() != (intervals + 1) * nodes)
    throw ConfigError("load", "expected " + std::to_string((intervals + 1) * nodes) + " values");
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericalError("non-finite load value");
    if (v < 0.0) throw ConfigError("load", "values must be nonnegative");
  }
}

LoadTrajectory LoadTrajectory::constant(double horizon, std::size_t intervals,
                                        std::span<const double> u) {
  std::vector<double> values;
  values.reserve((intervals + 1) * u.size());
  for (std::size_t i = 0; i <= intervals; ++i) values.insert(values.end(), u.begin(), u.end());
  return LoadTrajectory(horizon, intervals, u.size(), std::move(values));
}

std::vector<double> LoadTrajectory::times() const {
  std::vector<double> t(intervals_ + 1);
  for (std::size_t i = 0; i <= intervals_; ++i) t[i] = time(i);
  t.back() = horizon_;
  return t;
}

void LoadTrajectory::at(double t, std::span<double> out) const noexcept {
  const double x = std::clamp(t, 0.0, horizon_) / step();
  const auto i = std::min(static_cast<std::size_t>(x), intervals_ - 1);
  const double frac = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
  for (std::size_t j = 0; j < nodes_; ++j)
    out[j] = (1.0 - frac) * value(i, j) + frac * value(i + 1, j);
}

void LoadTrajectory::bounds(double t0, double t1, std::span<double> lo,
                            std::span<double> hi) const noexcept {
  at(t0, lo);
  at(t1, hi);
  for (std::size_t j = 0; j < nodes_; ++j) {
    if (lo[j] > hi[j]) std::swap(lo[j], hi[j]);
  }
  const double h = step();
  const auto first = static_cast<std::size_t>(std::floor(std::max(t0, 0.0) / h)) + 1;
  for (std::size_t i = first; i <= intervals_ && time(i) < t1; ++i) {
    for (std::size_t j = 0; j < nodes_; ++j) {
      lo[j] = std::min(lo[j], value(i, j));
      hi[j] = std::max(hi[j], value(i, j));
    }
  }
}

double LoadTrajectory::sup_distance(const LoadTrajectory& other) const {
  if (other.values_.size() != values_.size() || other.nodes_ != nodes_)
    throw ConfigError("load", "trajectories are on different grids");
  double d = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    d = std::max(d, std::abs(values_[i] - other.values_[i]));
  return d;
}

TrajectoryEnsemble simulate_frozen_load(const ModelConfig& cfg, std::size_t k,
                                        const LoadTrajectory& u, const SingleUserInit& init,
                                        const FrozenLoadOptions& opts) {
  check_frozen(cfg, k, u, opts.replicas);
  const std::size_t K = cfg.class_count();
  TrajectoryEnsemble ens;
  ens.times = u.times();
  ens.replicas = opts.replicas;
  ens.class_sizes.assign(K, 0);
  ens.class_sizes[k] = 1;
  ens.seed = opts.seed;
  ens.scheme = "exact";
  const std::size_t n_times = ens.times.size();
  ens.summaries.resize(opts.replicas * n_times * K);
  ens.snapshots.resize(opts.replicas * n_times);
  if (opts.record_paths) ens.paths.resize(opts.replicas);

  parallel_for(opts.replicas, opts.workers, [&](std::size_t rep) {
    auto engine = make_engine(cfg, k, u, init, opts.seed, rep, opts.record_paths,
                              opts.micro_step_factor, opts.max_micro_step);
    for (std::size_t ti = 0; ti < n_times; ++ti) {
      engine.advance_to(ens.times[ti]);
      const auto summary = engine.summary();
      std::copy(summary.begin(), summary.end(),
                ens.summaries.begin() + static_cast<std::ptrdiff_t>((rep * n_times + ti) * K));
      ens.snapshots[rep * n_times + ti] = engine.state(0);
    }
    if (opts.record_paths) {
      engine.finish();
      ens.paths[rep] = std::move(engine.paths()[0]);
    }
  });
  return ens;
}

LoadTrajectory picard_map(const ModelConfig& cfg, const std::vector<SingleUserInit>& init,
                          const LoadTrajectory& u, std::size_t replicas, std::uint64_t seed,
                          unsigned workers, std::vector<std::vector<double>>* class_mean,
                          std::vector<std::vector<double>>* class_mean_error) {
  const std::size_t K = cfg.class_count();
  if (init.size() != K) throw ConfigError("initial", "expected one entry per class");
  LoadTrajectory out(u.horizon(), u.intervals(), u.nodes());
  const std::size_t n_times = u.intervals() + 1;
  if (class_mean) class_mean->assign(K, std::vector<double>(n_times));
  if (class_mean_error) class_mean_error->assign(K, std::vector<double>(n_times));

  FrozenLoadOptions fo;
  fo.replicas = replicas;
  fo.seed = seed;
  fo.workers = workers;
  std::vector<double> column(replicas);
  for (std::size_t k = 0; k < K; ++k) {
    const auto ens = simulate_frozen_load(cfg, k, u, init[k], fo);
    for (std::size_t ti = 0; ti < n_times; ++ti) {
      for (std::size_t r = 0; r < replicas; ++r) column[r] = ens.snapshot(r, ti, 0).plus();
      const auto est = stats::mean_and_error(column);
      if (class_mean) (*class_mean)[k][ti] = est.mean;
      if (class_mean_error) (*class_mean_error)[k][ti] = est.std_error;
      for (std::size_t j = 0; j < cfg.nodes; ++j)
        out.value(ti, j) += cfg.allocation(j, k) * cfg.proportions[k] * est.mean;
    }
  }
  return out;
}

PicardReport picard_solve(const ModelConfig& cfg, const std::vector<SingleUserInit>& init,
                          const PicardOptions& opts) {
  require_valid(cfg);
  if (!(opts.tolerance > 0.0)) throw ConfigError("tol", "must be positive");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ConfigError("damping", "must lie in (0, 1]");
  if (opts.replicas == 0) throw ConfigError("replicas", "must be >= 1");
  if (opts.max_iterations == 0) throw ConfigError("max_iter", "must be >= 1");

  LoadTrajectory u = opts.initial_guess
                         ? *opts.initial_guess
                         : LoadTrajectory(opts.horizon, opts.grid_intervals, cfg.nodes);
  if (u.nodes() != cfg.nodes) throw ConfigError("u0", "wrong number of nodes");

  // A load-independent model makes F constant; the undamped step reaches its
  // fixed point at once.
  const double rho = any_load_dependence(cfg) ? opts.damping : 1.0;

  PicardReport report;
  report.iterates.push_back(u);
  for (std::size_t m = 0; m < opts.max_iterations; ++m) {
    const LoadTrajectory fu = picard_map(cfg, init, u, opts.replicas, opts.seed, opts.workers,
                                         &report.class_mean, &report.class_mean_error);
    std::vector<double> next(u.values().size());
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = (1.0 - rho) * u.values()[i] + rho * fu.values()[i];
      if (!std::isfinite(next[i]))
        throw NumericalError("Picard iterate " + std::to_string(m + 1) + " has a NaN load");
    }
    LoadTrajectory un(u.horizon(), u.intervals(), u.nodes(), std::move(next));
    const double d = un.sup_distance(u);
    report.distances.push_back(d);
    report.iterates.push_back(un);
    u = std::move(un);
    if (d <= opts.tolerance) {
      report.converged = true;
      break;
    }
  }
  report.iterations = report.distances.size();
  report.solution = u;
  return report;
}

CouplingEstimate coupling_distance(const ModelConfig& cfg, std::size_t k,
                                   const SingleUserInit& init1, const SingleUserInit& init2,
                                   const LoadTrajectory& u, std::size_t replicas,
                                   std::uint64_t seed, unsigned workers) {
  check_frozen(cfg, k, u, replicas);
  std::vector<double> dist(replicas);
  parallel_for(replicas, workers, [&](std::size_t rep) {
    auto e1 = make_engine(cfg, k, u, init1, seed, rep, true, 0.1, 0.05);
    auto e2 = make_engine(cfg, k, u, init2, seed, rep, true, 0.1, 0.05);
    e1.advance_to(u.horizon());
    e2.advance_to(u.horizon());
    e1.finish();
    e2.finish();
    dist[rep] = sup_trace_distance(e1.paths()[0], e2.paths()[0]);
  });
  const auto est = stats::mean_and_error(dist);
  return {est.mean, est.std_error};
}

}  // namespace mfaimd::mckean
