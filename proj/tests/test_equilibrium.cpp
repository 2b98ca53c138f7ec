#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mfaimd/analysis.hpp"
#include "mfaimd/equilibrium.hpp"
#include "mfaimd/error.hpp"
#include "mfaimd/particle_sim.hpp"
#include "mfaimd/stats.hpp"
#include "support.hpp"

using namespace mfaimd;
using namespace mfaimd::equilibrium;

namespace {

const std::vector<double> kZero{0.0};

HazardOptions hazard(std::size_t replicas, std::uint64_t seed) {
  HazardOptions o;
  o.replicas = replicas;
  o.seed = seed;
  return o;
}

/// Deterministic paths give a zero standard error; the floor covers quadrature error.
double tol3(double se) { return 3 * se + 1e-6; }

ModelConfig permanent(double a, double b, double r) {
  return testing::single_class(RateFamily::constant(1), RateFamily::constant(0), RateFamily::constant(a),
                               RateFamily::constant(b), r);
}

}  // namespace

TEST_CASE("permanent connection: pure drift") {
  PermanentOptions o;
  o.horizon = 5.0;
  o.initial = 0.3;
  const auto p = simulate_permanent(permanent(1.0, 0.0, 0.5), 0, kZero, o);
  CHECK(p.at(5.0).window() == doctest::Approx(5.3).epsilon(1e-14));
  CHECK(p.at(2.0).window() == doctest::Approx(2.3).epsilon(1e-14));
}

TEST_CASE("permanent connection: doubling a doubles the long-run mean") {
  PermanentOptions o;
  o.horizon = 20000.0;
  o.seed = 3;
  o.initial = 0.0;
  auto id = [](const UserState& s) { return s.plus(); };
  const auto m1 = analysis::ergodic_average(simulate_permanent(permanent(1.0, 0.5, 0.5), 0, kZero, o), id, 100.0);
  const auto m2 = analysis::ergodic_average(simulate_permanent(permanent(2.0, 0.5, 0.5), 0, kZero, o), id, 100.0);
  // Drift balance a = (1 - r) b E[V].
  CHECK(std::abs(m1.mean - 4.0) < 3 * m1.std_error + 0.01 * 4.0);
  CHECK(std::abs(m2.mean / m1.mean - 2.0) < 3 * 2.0 * std::hypot(m1.std_error / m1.mean, m2.std_error / m2.mean));
}

TEST_CASE("hazard functional analytic integrals") {
  const auto constant = hazard_functional(testing::onoff(), 0, kZero, {Polynomial::one(), Polynomial::identity()},
                                          hazard(1000, 1));
  CHECK(std::abs(constant[0].value - 0.5) < tol3(constant[0].std_error));
  CHECK(std::abs(constant[1].value - 0.25) < tol3(constant[1].std_error));
  REQUIRE(constant[0].bias_bound.has_value());
  CHECK(*constant[0].bias_bound <= 0.5 * std::exp(-20.0) * 1.0001);
  CHECK_FALSE(constant[1].bias_bound.has_value());

  const auto linear = hazard_functional(testing::shipped("linear_service.json"), 0, kZero,
                                        {Polynomial::one(), Polynomial::identity()}, hazard(1000, 1));
  CHECK(std::abs(linear[0].value - std::sqrt(std::numbers::pi / 4)) < tol3(linear[0].std_error));
  // Integral of t exp(-t^2) = 1/2.
  CHECK(std::abs(linear[1].value - 0.5) < tol3(linear[1].std_error));
  CHECK(linear[1].bias_bound.has_value());
}

TEST_CASE("hazard functional is monotone in the truncation level") {
  const auto cfg = testing::shipped("aimd_constant.json");
  double prev = 0.0, prev_se = 0.0;
  for (double cap : {1.0, 2.0, 5.0, 10.0, 20.0}) {
    auto o = hazard(2000, 5);
    o.hazard_cap = cap;
    const auto est = hazard_functional(cfg, 0, kZero, {Polynomial::identity()}, o)[0];
    CAPTURE(cap);
    CHECK(est.value >= prev - 3 * std::hypot(est.std_error, prev_se));
    prev = est.value;
    prev_se = est.std_error;
  }
}

TEST_CASE("stationary law of the constant-rate model") {
  const auto law = stationary_law(testing::onoff(), 0, kZero, hazard(10000, 2));
  CHECK(law.off_mass() == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(law.off_mass() * (1 + law.lambda() * law.normalization()) == doctest::Approx(1.0).epsilon(1e-14));
  const auto w = law.expectation(0.0, Polynomial::identity());
  CHECK(std::abs(w.value - 1.0 / 6.0) < tol3(w.std_error));
  const auto off = law.expectation(1.0, Polynomial{{0.0}});
  CHECK(off.value == doctest::Approx(law.off_mass()));
  const double sampled = law.expectation([](const UserState& s) { return s.plus(); });
  CHECK(sampled == doctest::Approx(1.0 / 6.0).epsilon(1e-3));
}

TEST_CASE("stationary law matches ergodic and regenerative averages") {
  const auto cfg = testing::onoff();
  const auto law = stationary_law(cfg, 0, kZero, hazard(10000, 2));
  particle::SimulationOptions o;
  o.horizon = 10000.0;
  o.samples = 1;
  o.seed = 31;
  o.record_paths = true;
  const auto ens = particle::simulate_exact(cfg, {1}, InitialCondition::from_model(), o);
  const auto& path = ens.path(0, 0);
  auto wplus = [](const UserState& s) { return s.plus(); };
  auto is_off = [](const UserState& s) { return s.is_off() ? 1.0 : 0.0; };
  const auto w_erg = analysis::ergodic_average(path, wplus, 10.0);
  const auto off_erg = analysis::ergodic_average(path, is_off, 10.0);
  const auto off_cyc = analysis::cycle_average(path, is_off);
  const auto w_pi = law.expectation(0.0, Polynomial::identity());
  CHECK(std::abs(w_erg.mean - w_pi.value) < 3 * std::hypot(w_erg.std_error, w_pi.std_error));
  CHECK(std::abs(off_erg.mean - law.off_mass()) < 3 * off_erg.std_error);
  CHECK(std::abs(off_cyc.mean - law.off_mass()) < 3 * off_cyc.std_error);
}

TEST_CASE("stationary law errors") {
  CHECK_THROWS_AS(stationary_law(testing::onoff(0.0, 2.0), 0, kZero, hazard(10, 0)), ConfigError);
  auto o = hazard(20, 0);
  o.time_cap = 50.0;
  CHECK_THROWS_AS(stationary_law(testing::shipped("permanent_aimd.json"), 0, kZero, o), InfiniteMassError);
}

TEST_CASE("closed form fixed points") {
  const auto c = closed_form_fixed_point(testing::onoff());
  REQUIRE(c.has_value());
  CHECK(c->u_star[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  const auto l = closed_form_fixed_point(testing::shipped("linear_service.json"));
  REQUIRE(l.has_value());
  const double z = std::sqrt(std::numbers::pi / 4);
  CHECK(l->normalization[0] == doctest::Approx(z).epsilon(1e-14));
  CHECK(l->u_star[0] == doctest::Approx(0.5 / (1 + z)).epsilon(1e-14));
  CHECK_FALSE(closed_form_fixed_point(testing::shipped("aimd_constant.json")).has_value());
  CHECK_FALSE(closed_form_fixed_point(testing::shipped("load_coupled.json")).has_value());
}

TEST_CASE("fixed point solve reproduces the closed forms") {
  for (const char* name : {"const_rate.json", "linear_service.json"}) {
    CAPTURE(name);
    const auto cfg = testing::shipped(name);
    FixedPointOptions o;
    o.hazard = hazard(10000, 4);
    const auto rep = fixed_point_solve(cfg, o);
    const auto cf = closed_form_fixed_point(cfg);
    REQUIRE(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(std::abs(rep.u_star[0] - cf->u_star[0]) < tol3(rep.u_star_error[0]));
    CHECK(rep.starts.size() == 3);
    CHECK(rep.distinct_limits.size() == 1);
  }
}

TEST_CASE("fixed point of a load-coupled model matches the long-run particle load") {
  const auto cfg = testing::shipped("load_coupled.json");
  FixedPointOptions o;
  o.hazard = hazard(1000, 6);
  o.tolerance = 1e-4;
  o.damping = 0.6;
  o.starts = 1;
  const auto rep = fixed_point_solve(cfg, o);
  REQUIRE(rep.converged);
  CHECK(rep.residual <= o.tolerance);

  particle::SimulationOptions so;
  so.horizon = 60.0;
  so.samples = 60;
  so.replicas = 3;
  so.seed = 8;
  so.scaled = true;
  const auto ens = particle::simulate_euler(cfg, {10000}, InitialCondition::from_model(), 0.01, so);
  std::vector<double> per_replica;
  for (std::size_t r = 0; r < so.replicas; ++r) {
    double s = 0;
    for (std::size_t ti = 20; ti <= 60; ++ti) s += ens.summary(r, ti, 0).mean_wplus;
    per_replica.push_back(s / 41);
  }
  const auto m = stats::mean_and_error(per_replica);
  CHECK(std::abs(m.mean - rep.u_star[0]) < 3 * std::hypot(m.std_error, rep.u_star_error[0]) + o.tolerance);
}

TEST_CASE("fixed point map scales linearly with the allocation matrix") {
  auto cfg = testing::shipped("two_class_rtt.json");
  const std::vector<double> u{0.5, 0.7};
  const auto base = fixed_point_map(cfg, u, hazard(500, 3));
  std::vector<double> scaled_a = cfg.allocation.row_major();
  for (auto& x : scaled_a) x *= 2.5;
  cfg.allocation = AllocationMatrix(2, 2, scaled_a);
  const auto scaled = fixed_point_map(cfg, u, hazard(500, 3));
  for (std::size_t j = 0; j < 2; ++j) CHECK(scaled[j] == doctest::Approx(2.5 * base[j]).epsilon(1e-12));
}

TEST_CASE("fixed point solve surfaces possibly infinite mass") {
  FixedPointOptions o;
  o.hazard = hazard(20, 0);
  o.hazard.time_cap = 50.0;
  const auto rep = fixed_point_solve(testing::shipped("permanent_aimd.json"), o);
  CHECK(rep.possibly_infinite);
  CHECK_FALSE(rep.converged);
  CHECK_FALSE(rep.diagnostic.empty());
}

TEST_CASE("fixed point solve on a two-class model") {
  FixedPointOptions o;
  o.hazard = hazard(1000, 2);
  const auto rep = fixed_point_solve(testing::shipped("two_class_rtt.json"), o);
  REQUIRE(rep.converged);
  CHECK(rep.u_star.size() == 2);
  CHECK(rep.classes.size() == 2);
  CHECK(rep.residual <= o.tolerance);
  CHECK(rep.starts.size() == 3);
  const auto image = fixed_point_map(testing::shipped("two_class_rtt.json"), rep.u_star, o.hazard);
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(image[j] - rep.u_star[j]) <= o.tolerance);
}
