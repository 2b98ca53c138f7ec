#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mfaimd/model.hpp"

namespace mfaimd {

/// Parses a model document:
///
///   { "nodes": J,
///     "allocation": [[A_11, ..., A_1K], ...]   (or a flat row-major array),
///     "proportions": [p_1, ..., p_K],
///     "classes": [ { "lambda": {"family": "constant", "params": {"c": 1}},
///                    "mu": ..., "a": ..., "b": ..., "r": 0.5,
///                    "alpha": {"family": "dirac", "params": {"w0": 0}} }, ... ],
///     "load_box": [u_1, ..., u_J] }                 (optional)
///
/// Only shape and type problems throw ConfigError here; value checks live in
/// validate_config so a bad model can still be reported on.
ModelConfig parse_config(std::string_view json_text);
ModelConfig load_config(const std::filesystem::path& path);

/// Canonical JSON for a model (sorted keys, no whitespace).
std::string config_to_json(const ModelConfig& cfg);

/// Sorted-key re-serialisation of an arbitrary JSON document; stable under key
/// reordering. Throws ConfigError on malformed input.
std::string canonical_json(std::string_view json_text);

/// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string digest_hex(std::string_view bytes);

}  // namespace mfaimd
