#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mfaimd/analysis.hpp"
#include "mfaimd/error.hpp"
#include "mfaimd/particle_sim.hpp"
#include "support.hpp"

using namespace mfaimd;
using analysis::WeightedAtoms;

namespace {

WeightedAtoms atoms(std::vector<UserState> s) { return {std::move(s), {}}; }

/// Equal-size uniform samples: sorted matching on the coordinate line.
double sorted_matching(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

std::vector<UserState> random_states(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> w(0.0, 4.0);
  std::bernoulli_distribution on(0.6);
  std::vector<UserState> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(on(gen) ? UserState::on(w(gen)) : UserState::off());
  return s;
}

}  // namespace

TEST_CASE("wasserstein examples") {
  CHECK(analysis::wasserstein1(atoms({UserState::on(1)}), atoms({UserState::on(3)})) == 2.0);
  CHECK(analysis::wasserstein1(atoms({UserState::off()}), atoms({UserState::on(1)})) == 2.0);
  const auto p = atoms({UserState::off(), UserState::on(0.5), UserState::on(2)});
  CHECK(analysis::wasserstein1(p, p) == 0.0);
  // Half the mass moves from OFF to ON(1): distance 2 * 1/2.
  const WeightedAtoms q{{UserState::off(), UserState::on(1)}, {0.5, 0.5}};
  CHECK(analysis::wasserstein1(atoms({UserState::off()}), q) == doctest::Approx(1.0));
  CHECK_THROWS_AS(analysis::wasserstein1(atoms({}), p), ConfigError);
}

TEST_CASE("wasserstein agrees with sorted matching on equal-size samples") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_states(gen, 37), y = random_states(gen, 37);
    std::vector<double> cx, cy;
    for (const auto& s : x) cx.push_back(s.coordinate());
    for (const auto& s : y) cy.push_back(s.coordinate());
    CHECK(analysis::wasserstein1(atoms(x), atoms(y)) == doctest::Approx(sorted_matching(cx, cy)).epsilon(1e-12));
  }
}

TEST_CASE("wasserstein satisfies the triangle inequality") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = atoms(random_states(gen, 1 + gen() % 20));
    const auto b = atoms(random_states(gen, 1 + gen() % 20));
    const auto c = atoms(random_states(gen, 1 + gen() % 20));
    const double ab = analysis::wasserstein1(a, b), bc = analysis::wasserstein1(b, c),
                 ac = analysis::wasserstein1(a, c);
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(ab == doctest::Approx(analysis::wasserstein1(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("ergodic average of a constant path is exact") {
  const Path p({{0.0, UserState::on(2.5)}, {100.0, UserState::on(2.5)}});
  const auto avg = analysis::ergodic_average(p, [](const UserState& s) { return s.plus(); }, 10.0);
  CHECK(avg.mean == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(avg.std_error == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(analysis::ergodic_average(p, [](const UserState&) { return 1.0; }, 60.0), ConfigError);
}

TEST_CASE("ergodic average of the ON indicator balances activation and departure") {
  particle::SimulationOptions o;
  o.horizon = 10000.0;
  o.samples = 1;
  o.seed = 4;
  o.record_paths = true;
  const auto ens = particle::simulate_exact(testing::onoff(), {1}, InitialCondition::from_model(), o);
  const auto avg = analysis::ergodic_average(ens.path(0, 0), [](const UserState& s) { return s.is_on() ? 1.0 : 0.0; }, 10.0);
  CHECK(std::abs(avg.mean - 1.0 / 3.0) <= avg.ci_half_width * 1.5);
  const auto cyc = analysis::cycle_average(ens.path(0, 0), [](const UserState& s) { return s.is_on() ? 1.0 : 0.0; });
  CHECK(std::abs(cyc.mean - 1.0 / 3.0) <= 3 * cyc.std_error);
}

TEST_CASE("pooled marginals and snapshots") {
  particle::SimulationOptions o;
  o.horizon = 1.0;
  o.samples = 2;
  o.replicas = 3;
  o.store_snapshots = true;
  const auto ens = particle::simulate_exact(testing::shipped("two_class_rtt.json"), {4, 2},
                                            InitialCondition::from_model(), o);
  CHECK(analysis::pooled_marginal(ens, 1, 0).atoms.size() == 12);
  CHECK(analysis::pooled_marginal(ens, 1, 1).atoms.size() == 6);
  const auto snap = analysis::snapshot_of(ens, 2, 2);
  CHECK(snap.t == 1.0);
  CHECK(snap.classes[0].size() == 4);
  CHECK(snap.classes[1][1] == ens.snapshot(2, 2, ens.user_index(1, 1)));
}

TEST_CASE("chaoticity report structure and input checks") {
  const auto cfg = testing::shipped("two_class_rtt.json");
  particle::SimulationOptions o;
  o.horizon = 1.0;
  o.samples = 2;
  o.replicas = 40;
  o.store_snapshots = true;
  o.scaled = true;
  std::vector<TrajectoryEnsemble> ens;
  for (std::size_t n : {5, 10, 20}) ens.push_back(particle::simulate_exact(cfg, {n, n}, InitialCondition::from_model(), o));
  std::vector<analysis::ChaosInput> in;
  for (auto& e : ens) in.push_back({e.total_users(), &e});
  analysis::ChaosOptions co;
  co.time_indices = {1, 2};
  co.reference_mean = std::vector<std::vector<double>>{{0.3, 0.3}, {0.2, 0.2}};
  const auto rep = analysis::chaoticity_report(in, co);
  // Three sizes, two times, three unordered class pairs.
  CHECK(rep.rows.size() == 3 * 2 * 3);
  CHECK(rep.times.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK(r.pair_cov_lo <= r.pair_cov);
    CHECK(r.pair_cov <= r.pair_cov_hi);
    CHECK(r.mean_error.has_value() == (r.class_a == r.class_b));
  }
  CHECK(rep.mean_error_fit[0].has_value());
  in.pop_back();
  CHECK_THROWS_AS(analysis::chaoticity_report(in, co), ConfigError);
}
