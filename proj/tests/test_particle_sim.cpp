#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mfaimd/analysis.hpp"
#include "mfaimd/error.hpp"
#include "mfaimd/particle_sim.hpp"
#include "mfaimd/stats.hpp"
#include "support.hpp"

using namespace mfaimd;
using particle::SimulationOptions;

namespace {

SimulationOptions opts(double horizon, std::size_t samples, std::size_t replicas, std::uint64_t seed) {
  SimulationOptions o;
  o.horizon = horizon;
  o.samples = samples;
  o.replicas = replicas;
  o.seed = seed;
  return o;
}

/// Moment equations p' = lambda (1 - p) - mu p, m' = a p - mu m from p = m = 0,
/// integrated by RK4 with a fine fixed step.
std::pair<double, double> moment_ode(double lambda, double mu, double a, double t) {
  double p = 0, m = 0;
  const int steps = 20000;
  const double h = t / steps;
  auto fp = [&](double p_) { return lambda * (1 - p_) - mu * p_; };
  auto fm = [&](double p_, double m_) { return a * p_ - mu * m_; };
  for (int i = 0; i < steps; ++i) {
    const double k1p = fp(p), k1m = fm(p, m);
    const double k2p = fp(p + h / 2 * k1p), k2m = fm(p + h / 2 * k1p, m + h / 2 * k1m);
    const double k3p = fp(p + h / 2 * k2p), k3m = fm(p + h / 2 * k2p, m + h / 2 * k2m);
    const double k4p = fp(p + h * k3p), k4m = fm(p + h * k3p, m + h * k3m);
    p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
    m += h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m);
  }
  return {p, m};
}

}  // namespace

TEST_CASE("exact scheme: pure drift reaches the horizon window") {
  auto o = opts(2.0, 4, 1, 0);
  o.store_snapshots = true;
  const auto ens = particle::simulate_exact(testing::drift_only(), {1},
                                            InitialCondition::explicit_states({{UserState::on(0.0)}}), o);
  CHECK(ens.snapshot(0, 4, 0) == UserState::on(2.0));
  CHECK(ens.snapshot(0, 2, 0).window() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("euler scheme: pure drift is integrated exactly") {
  auto o = opts(2.0, 4, 1, 0);
  o.store_snapshots = true;
  const auto ens = particle::simulate_euler(testing::drift_only(), {1},
                                            InitialCondition::explicit_states({{UserState::on(0.0)}}), 0.01, o);
  CHECK(std::abs(ens.snapshot(0, 4, 0).window() - 2.0) < 1e-9);
}

TEST_CASE("exact scheme: first activation time is exponential with rate 2") {
  auto cfg = testing::onoff(2.0, 0.0);
  auto o = opts(30.0, 1, 10000, 42);
  o.record_paths = true;
  const auto ens = particle::simulate_exact(cfg, {1}, InitialCondition::from_model(), o);
  std::vector<double> first;
  for (std::size_t r = 0; r < ens.replicas; ++r) {
    const auto& knots = ens.path(r, 0).knots();
    const auto it = std::find_if(knots.begin(), knots.end(), [](const PathPoint& p) { return p.state.is_on(); });
    REQUIRE(it != knots.end());
    first.push_back(it->t);
  }
  const auto m = stats::mean_and_error(first);
  CHECK(std::abs(m.mean - 0.5) <= 3 * 0.5 / 100);
}

TEST_CASE("exact scheme: means follow the moment equations") {
  const auto cfg = testing::onoff();
  const auto ens = particle::simulate_exact(cfg, {2000}, InitialCondition::from_model(), opts(3.0, 3, 20, 5));
  for (std::size_t ti = 1; ti <= 3; ++ti) {
    const auto [p, m] = moment_ode(1, 2, 1, ens.times[ti]);
    std::vector<double> on, mean;
    for (std::size_t r = 0; r < ens.replicas; ++r) {
      on.push_back(ens.summary(r, ti, 0).on_fraction);
      mean.push_back(ens.summary(r, ti, 0).mean_wplus);
    }
    const auto eon = stats::mean_and_error(on), emean = stats::mean_and_error(mean);
    CAPTURE(ti);
    CHECK(std::abs(eon.mean - p) < 4 * eon.std_error);
    CHECK(std::abs(emean.mean - m) < 4 * emean.std_error);
  }
}

TEST_CASE("euler scheme: means follow the moment equations up to O(dt)") {
  const auto cfg = testing::onoff();
  const auto ens = particle::simulate_euler(cfg, {2000}, InitialCondition::from_model(), 0.002, opts(3.0, 3, 20, 6));
  const auto [p, m] = moment_ode(1, 2, 1, 3.0);
  std::vector<double> on, mean;
  for (std::size_t r = 0; r < ens.replicas; ++r) {
    on.push_back(ens.summary(r, 3, 0).on_fraction);
    mean.push_back(ens.summary(r, 3, 0).mean_wplus);
  }
  const auto eon = stats::mean_and_error(on), emean = stats::mean_and_error(mean);
  CHECK(std::abs(eon.mean - p) < 4 * eon.std_error + 0.005);
  CHECK(std::abs(emean.mean - m) < 4 * emean.std_error + 0.005);
}

TEST_CASE("exact scheme: long-run ON fraction balances activation and departure") {
  const auto ens = particle::simulate_exact(testing::onoff(), {1000}, InitialCondition::from_model(), opts(40.0, 40, 1, 8));
  std::vector<double> on;
  for (std::size_t ti = 10; ti <= 40; ++ti) on.push_back(ens.summary(0, ti, 0).on_fraction);
  const auto m = stats::mean_and_error(on);
  // Samples one time unit apart are nearly independent at relaxation rate 3.
  CHECK(std::abs(m.mean - 1.0 / 3.0) < 4 * std::sqrt(2.0 / 9.0 / 1000.0 / on.size()) + 1e-3);
}

TEST_CASE("loss jumps multiply the window by r and windows stay nonnegative") {
  for (bool exact : {true, false}) {
    CAPTURE(exact);
    const auto cfg = testing::shipped("two_class_rtt.json");
    auto o = opts(10.0, 10, 2, 3);
    o.record_paths = true;
    o.store_snapshots = true;
    o.scaled = true;
    const std::vector<std::size_t> n{6, 4};
    const auto ens = exact ? particle::simulate_exact(cfg, n, InitialCondition::from_model(), o)
                           : particle::simulate_euler(cfg, n, InitialCondition::from_model(), 0.01, o);
    std::size_t losses = 0;
    for (std::size_t r = 0; r < ens.replicas; ++r)
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < n[k]; ++i) {
          const auto& kn = ens.path(r, ens.user_index(k, i)).knots();
          for (std::size_t j = 0; j < kn.size(); ++j) {
            REQUIRE(kn[j].state.window() >= 0.0);
            if (j > 0 && kn[j].t == kn[j - 1].t && kn[j].state.is_on() && kn[j - 1].state.is_on() &&
                kn[j].state != kn[j - 1].state) {
              ++losses;
              CHECK(kn[j].state.window() == doctest::Approx(cfg.classes[k].r * kn[j - 1].state.window()));
            }
          }
        }
    CHECK(losses > 0);
    CHECK(ens.snapshots.size() == ens.replicas * ens.times.size() * 10);
  }
}

TEST_CASE("simulation output does not depend on the worker count") {
  const auto cfg = testing::shipped("load_coupled.json");
  for (bool exact : {true, false}) {
    CAPTURE(exact);
    auto o = opts(3.0, 6, 6, 17);
    o.store_snapshots = true;
    o.scaled = true;
    auto run = [&](unsigned w) {
      o.workers = w;
      return exact ? particle::simulate_exact(cfg, {40}, InitialCondition::from_model(), o)
                   : particle::simulate_euler(cfg, {40}, InitialCondition::from_model(), 0.01, o);
    };
    const auto a = run(1), b = run(4);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    CHECK(a.snapshots == b.snapshots);
    bool same = true;
    for (std::size_t i = 0; i < a.summaries.size(); ++i)
      same = same && a.summaries[i].mean_wplus == b.summaries[i].mean_wplus &&
             a.summaries[i].on_fraction == b.summaries[i].on_fraction;
    CHECK(same);
  }
}

TEST_CASE("users within a class are exchangeable") {
  const auto cfg = testing::shipped("load_coupled.json");
  auto o = opts(10.0, 1, 1000, 23);
  o.record_paths = true;
  o.scaled = true;
  const auto ens = particle::simulate_exact(cfg, {5}, InitialCondition::from_model(), o);
  auto wplus = [](const UserState& s) { return s.plus(); };
  std::vector<double> first, last;
  for (std::size_t r = 0; r < ens.replicas; ++r) {
    first.push_back(ens.path(r, 0).integrate(wplus, 0.0, 10.0) / 10.0);
    last.push_back(ens.path(r, 4).integrate(wplus, 0.0, 10.0) / 10.0);
  }
  CHECK(stats::ks_two_sample(first, last).p_value > 0.01);
}

TEST_CASE("euler rejects bad steps") {
  const auto cfg = testing::onoff();
  CHECK_THROWS_AS(particle::simulate_euler(cfg, {1}, InitialCondition::from_model(), 0.0, opts(1, 1, 1, 0)),
                  ConfigError);
  CHECK_THROWS_AS(particle::simulate_euler(cfg, {1}, InitialCondition::from_model(), -0.1, opts(1, 1, 1, 0)),
                  ConfigError);
  CHECK_THROWS_AS(particle::simulate_euler(cfg, {1}, InitialCondition::all_on(1), 0.4, opts(1, 1, 1, 0)),
                  ConfigError);
  const auto warn = particle::simulate_euler(cfg, {1}, InitialCondition::from_model(), 0.2, opts(1, 1, 1, 0));
  CHECK_FALSE(warn.warnings.empty());
}

TEST_CASE("initial states follow the requested mix") {
  const auto cfg = testing::shipped("aimd_constant.json");
  const auto s = particle::initial_states(cfg, {20000}, InitialCondition::from_model(), 1, 0);
  double on = 0, w = 0;
  for (const auto& x : s[0]) {
    on += x.is_on();
    w += x.plus();
  }
  CHECK(std::abs(on / 20000 - cfg.classes[0].initial_on_fraction) < 0.015);
  // ON with probability 1/2, then Exp(mean 0.5): E[w+] = 0.25.
  CHECK(std::abs(w / 20000 - 0.25) < 0.015);
  const auto all = particle::initial_states(cfg, {10}, InitialCondition::all_on(1, InitialLaw::dirac(3.0)), 1, 0);
  for (const auto& x : all[0]) CHECK(x == UserState::on(3.0));
}

TEST_CASE("scaled runs divide the load by the user count") {
  // b = 10 u w: with all windows frozen at 1 the load is N unscaled and 1 scaled.
  const auto cfg = testing::shipped("load_coupled.json");
  const std::vector<std::vector<UserState>> s(1, std::vector<UserState>(50, UserState::on(1.0)));
  CHECK(particle::initial_max_rate(cfg, s, false) == doctest::Approx(10.0 * 50 + 0.2));
  CHECK(particle::initial_max_rate(cfg, s, true) == doctest::Approx(10.0 + 0.2));
}

TEST_CASE("euler marginal error is first order in dt") {
  const auto cfg = testing::shipped("aimd_constant.json");
  auto o = opts(10.0, 1, 1, 0);
  o.store_snapshots = true;
  const std::size_t n = 100000;
  o.seed = 1;
  const auto exact = analysis::pooled_marginal(particle::simulate_exact(cfg, {n}, InitialCondition::from_model(), o), 1, 0);
  std::vector<double> gap;
  for (double dt : {0.2, 0.1, 0.05}) {
    o.seed = 2;
    gap.push_back(analysis::wasserstein1(
        exact, analysis::pooled_marginal(particle::simulate_euler(cfg, {n}, InitialCondition::from_model(), dt, o), 1, 0)));
  }
  CAPTURE(gap[0]);
  CAPTURE(gap[1]);
  CAPTURE(gap[2]);
  CHECK(gap[1] / gap[0] == doctest::Approx(0.5).epsilon(0.3));
  CHECK(gap[2] / gap[1] == doctest::Approx(0.5).epsilon(0.3));
}
