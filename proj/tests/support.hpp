#pragma once

#include <string>
#include <vector>

#include "mfaimd/config_io.hpp"
#include "mfaimd/model.hpp"

namespace testing {

/// One node, one class, A = [[1]], p = [1].
inline mfaimd::ModelConfig single_class(mfaimd::RateFamily lambda, mfaimd::RateFamily mu,
                                        mfaimd::RateFamily a, mfaimd::RateFamily b, double r = 0.5,
                                        mfaimd::InitialLaw alpha = mfaimd::InitialLaw::dirac(0.0),
                                        double on_fraction = 0.0) {
  mfaimd::ModelConfig cfg;
  cfg.nodes = 1;
  cfg.allocation = mfaimd::AllocationMatrix(1, 1, {1.0});
  cfg.proportions = {1.0};
  mfaimd::ClassParams c;
  c.name = "c";
  c.lambda = std::move(lambda);
  c.mu = std::move(mu);
  c.a = std::move(a);
  c.b = std::move(b);
  c.r = r;
  c.alpha = alpha;
  c.initial_on_fraction = on_fraction;
  cfg.classes.push_back(std::move(c));
  return cfg;
}

/// lambda = 1, mu = 2, a = 1, b = 0, alpha = delta_0.
inline mfaimd::ModelConfig onoff(double lambda = 1.0, double mu = 2.0) {
  using mfaimd::RateFamily;
  return single_class(RateFamily::constant(lambda), RateFamily::constant(mu),
                      RateFamily::constant(1.0), RateFamily::constant(0.0));
}

/// Pure drift at speed 1: no events at all.
inline mfaimd::ModelConfig drift_only() { return onoff(0.0, 0.0); }

inline std::string config_path(const std::string& name) {
  return std::string(MFAIMD_CONFIG_DIR) + "/" + name;
}

inline mfaimd::ModelConfig shipped(const std::string& name) {
  return mfaimd::load_config(config_path(name));
}

inline const std::vector<std::string>& shipped_configs() {
  static const std::vector<std::string> names{"const_rate.json",   "linear_service.json",
                                              "aimd_constant.json", "permanent_aimd.json",
                                              "load_coupled.json", "two_class_rtt.json"};
  return names;
}

}  // namespace testing
