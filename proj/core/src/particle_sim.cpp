#include "mfaimd/particle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mfaimd/error.hpp"
#include "mfaimd/parallel.hpp"
#include "mfaimd/validation.hpp"
#include "thinning_engine.hpp"

namespace mfaimd::particle {
namespace {

void check_common(const ModelConfig& cfg, const std::vector<std::size_t>& counts,
                  const SimulationOptions& opts) {
  require_valid(cfg);
  if (counts.size() != cfg.class_count())
    throw ConfigError("n", "expected " + std::to_string(cfg.class_count()) + " class counts");
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] == 0) throw ConfigError("n[" + std::to_string(k) + "]", "must be >= 1");
  if (!(opts.horizon > 0.0) || !std::isfinite(opts.horizon))
    throw ConfigError("horizon", "must be positive and finite");
  if (opts.samples == 0) throw ConfigError("samples", "must be >= 1");
  if (opts.replicas == 0) throw ConfigError("replicas", "must be >= 1");
  if (!(opts.micro_step_factor > 0.0) || !(opts.max_micro_step > 0.0))
    throw ConfigError("micro_step", "must be positive");
}

TrajectoryEnsemble make_ensemble(const std::vector<std::size_t>& counts,
                                 const SimulationOptions& opts, std::string scheme) {
  TrajectoryEnsemble ens;
  ens.times.resize(opts.samples + 1);
  for (std::size_t i = 0; i <= opts.samples; ++i)
    ens.times[i] = opts.horizon * static_cast<double>(i) / static_cast<double>(opts.samples);
  ens.replicas = opts.replicas;
  ens.class_sizes = counts;
  ens.seed = opts.seed;
  ens.scheme = std::move(scheme);
  ens.scaled = opts.scaled;
  const std::size_t K = counts.size();
  const std::size_t n = ens.total_users();
  ens.summaries.resize(opts.replicas * ens.times.size() * K);
  if (opts.store_snapshots) ens.snapshots.resize(opts.replicas * ens.times.size() * n);
  if (opts.record_paths) ens.paths.resize(opts.replicas * n);
  return ens;
}

double load_scale(const std::vector<std::size_t>& counts, bool scaled) {
  return scaled ? static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}))
                : 1.0;
}

}  // namespace

std::vector<std::vector<UserState>> initial_states(const ModelConfig& cfg,
                                                   const std::vector<std::size_t>& counts,
                                                   const InitialCondition& init,
                                                   std::uint64_t seed, std::size_t replica) {
  const std::size_t K = cfg.class_count();
  if (init.states) {
    const auto& s = *init.states;
    if (s.size() != K) throw ConfigError("initial", "expected one state list per class");
    for (std::size_t k = 0; k < K; ++k)
      if (s[k].size() != counts[k])
        throw ConfigError("initial[" + std::to_string(k) + "]", "size differs from the class count");
    return s;
  }
  if (!init.on_fraction.empty() && init.on_fraction.size() != K)
    throw ConfigError("initial.on_fraction", "expected one entry per class");
  if (!init.law.empty() && init.law.size() != K)
    throw ConfigError("initial.law", "expected one entry per class");

  std::vector<std::vector<UserState>> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double frac =
        init.on_fraction.empty() ? cfg.classes[k].initial_on_fraction : init.on_fraction[k];
    if (!(frac >= 0.0 && frac <= 1.0))
      throw ConfigError("initial.on_fraction", "must lie in [0, 1]");
    const InitialLaw& law =
        (!init.law.empty() && init.law[k]) ? *init.law[k] : cfg.classes[k].alpha;
    out[k].reserve(counts[k]);
    for (std::size_t n = 0; n < counts[k]; ++n) {
      auto rng = CounterRng::for_stream({seed, replica, k, n, Channel::Init});
      if (frac > 0.0 && rng.uniform() < frac)
        out[k].push_back(UserState::on(law.sample(rng)));
      else
        out[k].push_back(UserState::off());
    }
  }
  return out;
}

double initial_max_rate(const ModelConfig& cfg, const std::vector<std::vector<UserState>>& states,
                        bool scaled) {
  std::size_t total = 0;
  for (const auto& s : states) total += s.size();
  const auto u =
      node_loads(states, cfg.allocation,
                 scaled ? std::optional<double>(static_cast<double>(total)) : std::nullopt);
  double max_rate = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (const auto& s : states[k]) {
      const RateSet r = eval_rates(cfg, k, s, u);
      max_rate = std::max(max_rate, s.is_on() ? r.b + r.mu : r.lambda);
    }
  }
  return max_rate;
}

TrajectoryEnsemble simulate_exact(const ModelConfig& cfg, const std::vector<std::size_t>& counts,
                                  const InitialCondition& init, const SimulationOptions& opts) {
  check_common(cfg, counts, opts);
  TrajectoryEnsemble ens = make_ensemble(counts, opts, "exact");
  const std::size_t K = counts.size();
  const std::size_t n_users = ens.total_users();
  const std::size_t n_times = ens.times.size();

  parallel_for(opts.replicas, opts.workers, [&](std::size_t rep) {
    detail::ThinningEngine::Params p;
    p.cfg = &cfg;
    p.scale = load_scale(counts, opts.scaled);
    p.micro_step_factor = opts.micro_step_factor;
    p.max_micro_step = opts.max_micro_step;
    p.record_paths = opts.record_paths;
    p.seed = opts.seed;
    p.replica = rep;
    detail::ThinningEngine engine(p, initial_states(cfg, counts, init, opts.seed, rep));

    for (std::size_t ti = 0; ti < n_times; ++ti) {
      engine.advance_to(ens.times[ti]);
      const auto summary = engine.summary();
      std::copy(summary.begin(), summary.end(),
                ens.summaries.begin() + static_cast<std::ptrdiff_t>((rep * n_times + ti) * K));
      if (opts.store_snapshots)
        for (std::size_t i = 0; i < n_users; ++i)
          ens.snapshots[(rep * n_times + ti) * n_users + i] = engine.state(i);
    }
    if (opts.record_paths) {
      engine.finish();
      auto& paths = engine.paths();
      std::move(paths.begin(), paths.end(),
                ens.paths.begin() + static_cast<std::ptrdiff_t>(rep * n_users));
    }
  });
  return ens;
}

TrajectoryEnsemble simulate_euler(const ModelConfig& cfg, const std::vector<std::size_t>& counts,
                                  const InitialCondition& init, double dt,
                                  const SimulationOptions& opts) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive and finite");
  check_common(cfg, counts, opts);
  TrajectoryEnsemble ens = make_ensemble(counts, opts, "euler");
  const std::size_t K = counts.size();
  const std::size_t n_users = ens.total_users();
  const std::size_t n_times = ens.times.size();
  const double scale = load_scale(counts, opts.scaled);

  const double out_step = opts.horizon / static_cast<double>(opts.samples);
  const auto per_out = static_cast<std::size_t>(std::ceil(out_step / dt * (1.0 - 1e-12)));
  const double h = out_step / static_cast<double>(per_out);

  const double rate0 = initial_max_rate(cfg, initial_states(cfg, counts, init, opts.seed, 0),
                                        opts.scaled);
  if (rate0 * h > 0.5)
    throw ConfigError("dt", "max-rate*dt = " + std::to_string(rate0 * h) + " exceeds 0.5");
  if (rate0 * h > 0.1)
    ens.warnings.push_back("max-rate*dt = " + std::to_string(rate0 * h) + " exceeds 0.1");

  parallel_for(opts.replicas, opts.workers, [&](std::size_t rep) {
    const auto init_states = initial_states(cfg, counts, init, opts.seed, rep);
    std::vector<std::uint32_t> cls(n_users);
    std::vector<UserState> state(n_users);
    std::vector<CounterRng> rng(3 * n_users);
    std::size_t i = 0;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t n = 0; n < counts[k]; ++n, ++i) {
        cls[i] = static_cast<std::uint32_t>(k);
        state[i] = init_states[k][n];
        for (int c = 0; c < 3; ++c)
          rng[3 * i + c] = CounterRng::for_stream({opts.seed, rep, k, n, static_cast<Channel>(c)});
      }
    }
    std::vector<Path> paths;
    if (opts.record_paths) {
      paths.resize(n_users);
      for (std::size_t u = 0; u < n_users; ++u) paths[u].push(0.0, state[u]);
    }

    std::vector<double> load(cfg.nodes, 0.0);
    std::vector<double> class_sum(K);
    auto refresh_load = [&] {
      std::fill(class_sum.begin(), class_sum.end(), 0.0);
      for (std::size_t u = 0; u < n_users; ++u) class_sum[cls[u]] += state[u].plus();
      std::fill(load.begin(), load.end(), 0.0);
      for (std::size_t j = 0; j < cfg.nodes; ++j)
        for (std::size_t k = 0; k < K; ++k) load[j] += cfg.allocation(j, k) * class_sum[k] / scale;
    };
    auto record = [&](std::size_t ti) {
      std::vector<ClassSummary> s(K);
      std::vector<std::size_t> on(K, 0);
      std::fill(class_sum.begin(), class_sum.end(), 0.0);
      for (std::size_t u = 0; u < n_users; ++u) {
        class_sum[cls[u]] += state[u].plus();
        on[cls[u]] += state[u].is_on() ? 1 : 0;
      }
      for (std::size_t k = 0; k < K; ++k) {
        const auto nk = static_cast<double>(counts[k]);
        ens.summaries[(rep * n_times + ti) * K + k] = {class_sum[k] / nk,
                                                       static_cast<double>(on[k]) / nk};
      }
      if (opts.store_snapshots)
        std::copy(state.begin(), state.end(),
                  ens.snapshots.begin() +
                      static_cast<std::ptrdiff_t>((rep * n_times + ti) * n_users));
    };

    record(0);
    double t = 0.0;
    for (std::size_t ti = 1; ti < n_times; ++ti) {
      for (std::size_t step = 0; step < per_out; ++step) {
        refresh_load();
        t = step + 1 == per_out ? ens.times[ti] : t + h;
        for (std::size_t u = 0; u < n_users; ++u) {
          const ClassParams& c = cfg.classes[cls[u]];
          const UserState before = state[u];
          if (before.is_on()) {
            const RateSet r = eval_rates(cfg, cls[u], before, load);
            const double ud = rng[3 * u + 2].uniform();
            const double un = rng[3 * u + 1].uniform();
            const double w = before.window() + r.a * h;
            if (ud < r.mu * h) {
              state[u] = UserState::off();
            } else if (un < r.b * h) {
              state[u] = UserState::on(c.r * w);
            } else {
              state[u] = UserState::on(w);
              if (opts.record_paths) paths[u].push(t, state[u]);
              continue;
            }
            if (opts.record_paths) {
              paths[u].push(t, UserState::on(w));
              paths[u].push(t, state[u]);
            }
          } else {
            const double ua = rng[3 * u].uniform();
            if (ua < c.lambda(0.0, load) * h) {
              state[u] = UserState::on(c.alpha.sample(rng[3 * u]));
              if (opts.record_paths) {
                paths[u].push(t, before);
                paths[u].push(t, state[u]);
              }
            }
          }
        }
      }
      record(ti);
    }
    if (opts.record_paths) {
      for (std::size_t u = 0; u < n_users; ++u) {
        const auto& knots = paths[u].knots();
        if (knots.back().t < t) paths[u].push(t, state[u]);
      }
      std::move(paths.begin(), paths.end(),
                ens.paths.begin() + static_cast<std::ptrdiff_t>(rep * n_users));
    }
  });
  return ens;
}

}  // namespace mfaimd::particle
