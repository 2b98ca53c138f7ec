#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfaimd/model.hpp"
#include "mfaimd/path.hpp"

namespace mfaimd::equilibrium {

/// Permanent connection of class k at the fixed load u: drift a_k(., u),
/// losses at rate b_k(., u) with factor r_k, never switched OFF. V(0) is
/// drawn from alpha_k unless `initial` is given.
struct PermanentOptions {
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::size_t replica = 0;
  std::optional<double> initial;
  double micro_step_factor = 0.1;
  double max_micro_step = 0.05;
};

Path simulate_permanent(const ModelConfig& cfg, std::size_t k, std::span<const double> u,
                        const PermanentOptions& opts);

/// Test functional f(x) = sum_i c_i x^i on the ON part.
struct Polynomial {
  std::vector<double> coeff;

  static Polynomial one() { return {{1.0}}; }
  static Polynomial identity() { return {{0.0, 1.0}}; }
  double operator()(double x) const noexcept;
  std::size_t degree() const noexcept;
};

struct HazardOptions {
  std::size_t replicas = 1000;
  double hazard_cap = 20.0;   ///< stop a path once its cumulative hazard reaches this
  double time_cap = 1000.0;   ///< hard cap on path length
  std::uint64_t seed = 0;
  unsigned workers = 0;
  double quadrature_step = 0.01;
  double micro_step_factor = 0.1;
};

/// Estimate of the killed-process integral of f:
/// integral_0^inf E[ f(V(t)) exp(-integral_0^t mu(V(s), u) ds) ] dt.
struct HazardFunctionalEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double truncation_time = 0.0;      ///< mean path length used
  double max_truncation_time = 0.0;
  std::size_t replicas = 0;
  /// C * exp(-hazard_cap) when |f| <= C mu on R+; empty when that domination
  /// does not hold and the truncation bias is heuristic.
  std::optional<double> bias_bound;
  /// A path hit time_cap before hazard_cap with its integral still growing.
  bool possibly_infinite = false;
};

/// Estimates for several functionals on one shared set of V-paths.
std::vector<HazardFunctionalEstimate> hazard_functional(const ModelConfig& cfg, std::size_t k,
                                                        std::span<const double> u,
                                                        const std::vector<Polynomial>& fs,
                                                        const HazardOptions& opts);

/// Stationary law of one class at a fixed load: mass 1/(1 + lambda Z) at
/// OFF and lambda/(1 + lambda Z) times the killed-process occupation measure
/// on the ON part.
class StationaryLaw {
 public:
  struct Weighted {
    double window;
    double weight;
  };

  double lambda() const noexcept { return lambda_; }
  /// Z = killed-process integral of f = 1.
  double normalization() const noexcept { return z_; }
  double normalization_error() const noexcept;
  double off_mass() const noexcept { return 1.0 / (1.0 + lambda_ * z_); }
  double on_mass() const noexcept { return lambda_ * z_ / (1.0 + lambda_ * z_); }
  std::size_t replicas() const noexcept { return replicas_; }
  bool possibly_infinite() const noexcept { return possibly_infinite_; }

  struct Expectation {
    double value = 0.0;
    double std_error = 0.0;
  };
  /// pi(f) for f = f_off at OFF and the polynomial p on the ON part, with a
  /// delta-method standard error. p must have degree <= max_degree().
  Expectation expectation(double f_off, const Polynomial& p) const;
  /// pi(f) for an arbitrary f from the stored weighted path samples.
  double expectation(const std::function<double(const UserState&)>& f) const;

  std::size_t max_degree() const noexcept { return degree_; }
  const std::vector<Weighted>& samples() const noexcept { return samples_; }

 private:
  friend StationaryLaw stationary_law(const ModelConfig&, std::size_t, std::span<const double>,
                                      const HazardOptions&, std::size_t, bool);

  double lambda_ = 0.0;
  double z_ = 0.0;
  std::size_t replicas_ = 0;
  std::size_t degree_ = 0;
  bool possibly_infinite_ = false;
  /// Per-path integrals of x^0..x^degree: [path * (degree + 1) + i]
  std::vector<double> moments_;
  /// Quadrature nodes on the ON part, weights already divided by replicas.
  std::vector<Weighted> samples_;
};

/// Throws InfiniteMassError when Z may be infinite, ConfigError when
/// lambda(u) = 0.
StationaryLaw stationary_law(const ModelConfig& cfg, std::size_t k, std::span<const double> u,
                             const HazardOptions& opts, std::size_t max_degree = 4,
                             bool store_samples = true);

struct FixedPointOptions {
  std::optional<std::vector<double>> initial_guess;
  double tolerance = 1e-4;
  double damping = 1.0;
  std::size_t max_iterations = 200;
  std::size_t starts = 3;
  HazardOptions hazard;
};

struct ClassEquilibrium {
  double normalization = 0.0;  ///< Z_k(u*)
  double normalization_error = 0.0;
  double activation_rate = 0.0;  ///< lambda_k(u*)
  double on_probability = 0.0;
  double mean_window = 0.0;  ///< pi(w+)
  double mean_window_error = 0.0;
};

struct IterationRecord {
  std::size_t start = 0;
  std::size_t iteration = 0;
  std::vector<double> u;
  std::vector<double> image;  ///< F(u)
  double residual = 0.0;      ///< ||u - F(u)||
};

struct StartOutcome {
  std::vector<double> initial;
  std::vector<double> limit;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool oscillating = false;
};

struct FixedPointReport {
  std::vector<double> u_star;
  /// Monte-Carlo standard error of F(u*) per node.
  std::vector<double> u_star_error;
  double residual = 0.0;
  bool converged = false;
  bool oscillating = false;
  std::size_t iterations = 0;
  std::vector<ClassEquilibrium> classes;
  std::vector<IterationRecord> trace;
  std::vector<StartOutcome> starts;
  /// Converged limits more than 10*tol apart in sup-norm.
  std::vector<std::vector<double>> distinct_limits;
  bool possibly_infinite = false;
  std::string diagnostic;
};

/// F(u)_j = sum_k A(j,k) p_k lambda_k(u)/(1 + lambda_k(u) Z_k(u)) *
///          integral E[V exp(-integral mu)] dt.
std::vector<double> fixed_point_map(const ModelConfig& cfg, std::span<const double> u,
                                    const HazardOptions& opts);

/// Damped iteration u <- (1 - rho) u + rho F(u) with common random numbers,
/// from `starts` initial points (the first is the given guess or 0, the rest
/// random in the a-priori load box).
FixedPointReport fixed_point_solve(const ModelConfig& cfg, const FixedPointOptions& opts);

struct ClosedForm {
  std::vector<double> u_star;
  std::vector<double> normalization;  ///< Z_k
  std::vector<double> numerator;      ///< integral E[V exp(-integral mu)] dt per class
};

/// Exact solution when every class has b = 0, constant a, a Dirac alpha,
/// constant lambda and a load-independent mu that is either constant or
/// proportional to the window. Empty otherwise.
std::optional<ClosedForm> closed_form_fixed_point(const ModelConfig& cfg);

}  // namespace mfaimd::equilibrium
