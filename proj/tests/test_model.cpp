#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "mfaimd/config_io.hpp"
#include "mfaimd/error.hpp"
#include "mfaimd/model.hpp"
#include "mfaimd/rng.hpp"
#include "mfaimd/stats.hpp"
#include "mfaimd/validation.hpp"
#include "support.hpp"

using namespace mfaimd;

TEST_CASE("user state encoding") {
  CHECK(UserState::off().plus() == 0.0);
  CHECK(UserState::on(2.5).plus() == 2.5);
  CHECK(UserState::off().coordinate() == -1.0);
  CHECK(UserState::from_coordinate(-1.0).is_off());
  CHECK(UserState::from_coordinate(0.0) == UserState::on(0.0));
  CHECK_THROWS_AS(UserState::on(-0.1), ConfigError);
  CHECK_THROWS_AS(UserState::on(NAN), ConfigError);
  CHECK(trace_distance(UserState::off(), UserState::on(1.0)) == 2.0);
  CHECK(trace_distance(UserState::on(1.0), UserState::on(3.0)) == 2.0);
}

TEST_CASE("plus is 1-Lipschitz for the trace metric") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> w(0.0, 10.0);
  std::bernoulli_distribution on(0.7);
  for (int i = 0; i < 10000; ++i) {
    const auto x = on(gen) ? UserState::on(w(gen)) : UserState::off();
    const auto y = on(gen) ? UserState::on(w(gen)) : UserState::off();
    CHECK(std::abs(x.plus() - y.plus()) <= trace_distance(x, y) + 1e-15);
  }
}

TEST_CASE("node loads examples") {
  const AllocationMatrix A(2, 2, {1, 1, 0, 2});
  const std::vector<std::vector<UserState>> s{{UserState::on(2.0), UserState::off()},
                                              {UserState::on(0.5)}};
  const auto u = node_loads(s, A);
  CHECK(u[0] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(u[1] == doctest::Approx(1.0).epsilon(1e-15));
  const auto us = node_loads(s, A, 3.0);
  CHECK(us[0] == doctest::Approx(2.5 / 3).epsilon(1e-15));
  CHECK(us[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  const std::vector<std::vector<UserState>> off{{UserState::off(), UserState::off()},
                                                {UserState::off()}};
  CHECK(node_loads(off, A) == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(node_loads(s, A, 0.0), ConfigError);
  CHECK_THROWS_AS(node_loads({{UserState::off()}}, A), ConfigError);
}

TEST_CASE("node loads are additive and positively homogeneous in the windows") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> w(0.0, 5.0), coef(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const AllocationMatrix A(3, 2, {coef(gen), coef(gen), coef(gen), coef(gen), coef(gen), coef(gen)});
    std::vector<std::vector<UserState>> x(2), y(2), sum(2), scaled(2);
    const double c = coef(gen);
    for (std::size_t k = 0; k < 2; ++k)
      for (int n = 0; n < 5; ++n) {
        const bool on = (gen() & 1) != 0;
        const double a = w(gen), b = w(gen);
        x[k].push_back(on ? UserState::on(a) : UserState::off());
        y[k].push_back(on ? UserState::on(b) : UserState::off());
        sum[k].push_back(on ? UserState::on(a + b) : UserState::off());
        scaled[k].push_back(on ? UserState::on(c * a) : UserState::off());
      }
    const auto ux = node_loads(x, A), uy = node_loads(y, A), us = node_loads(sum, A),
               uc = node_loads(scaled, A);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(us[j] == doctest::Approx(ux[j] + uy[j]).epsilon(1e-12));
      CHECK(uc[j] == doctest::Approx(c * ux[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rate family examples") {
  const std::vector<double> u2{2.0};
  CHECK(RateFamily::reciprocal(0.1)(3.0, u2) == doctest::Approx(10.0));
  CHECK(RateFamily::reciprocal(0.1, {0.05})(0.0, u2) == doctest::Approx(5.0));
  CHECK(RateFamily::window_times(0.5)(4.0, u2) == doctest::Approx(2.0));
  CHECK(RateFamily::load_affine(1.0, {0.5})(7.0, u2) == doctest::Approx(2.0));
  CHECK(RateFamily::constant(3.0)(7.0, u2) == 3.0);

  auto cfg = testing::single_class(RateFamily::constant(1), RateFamily::constant(2),
                                   RateFamily::reciprocal(0.1, {0.05}), RateFamily::window_times(0.5));
  const auto rs = eval_rates(cfg, 0, UserState::on(4.0), u2);
  CHECK(rs.lambda == 1.0);
  CHECK(rs.mu == 2.0);
  CHECK(rs.a == doctest::Approx(5.0));
  CHECK(rs.b == doctest::Approx(2.0));
}

TEST_CASE("upper_bound dominates the family on the box") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::vector<RateFamily> fams{RateFamily::constant(1.5), RateFamily::load_affine(0.2, {1.0, -0.0}),
                                     RateFamily::window_times(0.3, {0.5, 0.1}),
                                     RateFamily::reciprocal(0.4, {0.2, 0.3})};
  const std::vector<double> lo{0.0, 0.0}, hi{2.0, 3.0};
  for (const auto& f : fams)
    for (int i = 0; i < 2000; ++i) {
      const double w = 5.0 * U(gen);
      const std::vector<double> u{2.0 * U(gen), 3.0 * U(gen)};
      CHECK(f(w, u) <= f.upper_bound(5.0, lo, hi) + 1e-12);
    }
}

TEST_CASE("shipped configs give nonnegative rates on their load box") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const auto& name : testing::shipped_configs()) {
    CAPTURE(name);
    const auto cfg = testing::shipped(name);
    std::vector<double> box = cfg.load_box.empty() ? std::vector<double>(cfg.nodes, 10.0) : cfg.load_box;
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
      std::vector<double> u(cfg.nodes);
      for (std::size_t j = 0; j < cfg.nodes; ++j) u[j] = box[j] * U(gen);
      const auto s = U(gen) < 0.2 ? UserState::off() : UserState::on(50.0 * U(gen));
      for (std::size_t k = 0; k < cfg.class_count(); ++k) {
        const auto r = eval_rates(cfg, k, s, u);
        if (!(r.lambda >= 0 && r.mu >= 0 && r.a >= 0 && r.b >= 0)) ++bad;
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("validation examples") {
  const auto constant = testing::onoff();
  const auto rep = validate_config(constant);
  REQUIRE(rep.ok());
  CHECK(rep.classes[0].branch == ConditionBranch::LipschitzExponentialMoment);
  CHECK(rep.classes[0].finite_mass_guaranteed);

  auto aimd = testing::single_class(RateFamily::constant(1), RateFamily::constant(1),
                                    RateFamily::constant(1), RateFamily::window_times(0.5));
  const auto rep2 = validate_config(aimd);
  REQUIRE(rep2.ok());
  CHECK(rep2.classes[0].branch == ConditionBranch::WindowProportionalGaussian);

  auto bad = testing::onoff();
  bad.classes[0].r = 1.3;
  const auto rep3 = validate_config(bad);
  REQUIRE_FALSE(rep3.ok());
  CHECK(rep3.errors[0].field == "classes[0].r");
  CHECK_THROWS_AS(require_valid(bad), ConfigError);

  auto neg = testing::onoff();
  neg.classes[0].mu = RateFamily::constant(-1.0);
  CHECK_FALSE(validate_config(neg).ok());

  auto dims = testing::onoff();
  dims.proportions = {0.5, 0.5};
  CHECK_FALSE(validate_config(dims).ok());
}

TEST_CASE("all shipped configs validate") {
  for (const auto& name : testing::shipped_configs()) {
    CAPTURE(name);
    CHECK(validate_config(testing::shipped(name)).ok());
  }
}

TEST_CASE("config documents round-trip and digest canonically") {
  const auto cfg = testing::shipped("two_class_rtt.json");
  const auto text = config_to_json(cfg);
  CHECK(config_to_json(parse_config(text)) == text);
  CHECK(canonical_json(R"({"b": 1, "a": [1, 2]})") == canonical_json(R"({ "a":[1,2],"b":1 })"));
  CHECK(digest_hex(canonical_json(R"({"b": 1, "a": 2})")) ==
        digest_hex(canonical_json(R"({"a": 2, "b": 1})")));
  CHECK(digest_hex("a") != digest_hex("b"));
  CHECK(digest_hex("").size() == 16);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"nodes": 1})"), ConfigError);
}

TEST_CASE("counter rng streams are reproducible and distinct") {
  auto a = CounterRng::for_stream({1, 2, 3, 4, Channel::Loss});
  auto b = CounterRng::for_stream({1, 2, 3, 4, Channel::Loss});
  auto c = CounterRng::for_stream({1, 2, 3, 4, Channel::Departure});
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
  }
  std::set<std::uint64_t> keys;
  for (std::uint64_t r = 0; r < 10; ++r)
    for (std::uint64_t n = 0; n < 10; ++n)
      for (int ch = 0; ch < 4; ++ch)
        keys.insert(CounterRng::key_for({0, r, 0, n, static_cast<Channel>(ch)}));
  CHECK(keys.size() == 400);
}

TEST_CASE("counter rng uniform and exponential moments") {
  auto g = CounterRng::for_stream({9, 0, 0, 0, Channel::Init});
  const int n = 200000;
  double su = 0, se = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    su += u;
    se += g.exponential();
  }
  CHECK(std::abs(su / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(se / n - 1.0) < 4 / std::sqrt(double(n)));
}

TEST_CASE("statistics helpers") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto f = stats::ols(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_error == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stats::student_t_quantile(0.975, 10) == doctest::Approx(2.228138851986).epsilon(1e-9));
  CHECK(stats::normal_quantile(0.995) == doctest::Approx(2.575829303549).epsilon(1e-9));
  const auto m = stats::mean_and_error(x);
  CHECK(m.mean == 2.5);
  CHECK(m.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(stats::sample_covariance(x, y) == doctest::Approx(2 * stats::sample_variance(x)));
  CHECK(stats::ks_two_sample(x, x).statistic == 0.0);
  const std::vector<double> far{10, 11, 12, 13, 14, 15, 16, 17};
  const std::vector<double> near{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(stats::ks_two_sample(near, far).statistic == 1.0);
}

TEST_CASE("a-priori load bound") {
  const auto cfg = testing::onoff();
  const std::vector<double> m0{0.0};
  const auto b = apriori_load_bound(cfg, m0, 2.0);
  REQUIRE(b.size() == 1);
  CHECK(b[0] == doctest::Approx(2.0));
}
