#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfaimd/model.hpp"

namespace mfaimd::cli {

/// Everything a subcommand needs besides its own flags. Commands append the
/// files they write to `outputs` and their effective parameters to `params`.
struct RunContext {
  ModelConfig cfg;
  std::string config_text;  ///< canonical JSON of the input document
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;
  nlohmann::json params = nlohmann::json::object();
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

struct SimulateArgs {
  std::vector<std::size_t> n;
  double horizon = 10.0;
  std::optional<double> dt;
  std::size_t replicas = 1;
  std::size_t samples = 100;
  bool scaled = false;
};

struct PicardArgs {
  double horizon = 10.0;
  std::size_t grid = 50;
  std::size_t replicas = 1000;
  double tol = 1e-3;
  double damping = 0.7;
  std::size_t max_iter = 50;
};

struct EquilibriumArgs {
  std::vector<double> u0;
  double tol = 1e-4;
  double damping = 1.0;
  std::size_t max_iter = 200;
  std::size_t replicas = 1000;
  double hmax = 20.0;
  double tmax = 1000.0;
  std::size_t starts = 3;
};

struct ChaosArgs {
  std::vector<std::size_t> n_grid{50, 100, 200, 400, 800};
  double horizon = 5.0;
  std::size_t replicas = 200;
  std::size_t samples = 10;
  std::size_t grid = 50;
  std::size_t picard_replicas = 20000;
  std::size_t pair_sample = 0;
};

int simulate(RunContext& ctx, const SimulateArgs& args);
int picard(RunContext& ctx, const PicardArgs& args);
int equilibrium(RunContext& ctx, const EquilibriumArgs& args);
int chaos_study(RunContext& ctx, const ChaosArgs& args);
int validate(RunContext& ctx);

/// printf("%.17g") so values round-trip exactly.
std::string format_double(double x);

}  // namespace mfaimd::cli
