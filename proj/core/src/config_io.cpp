#include "mfaimd/config_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mfaimd/error.hpp"
#include "overloaded.hpp"

namespace mfaimd {
namespace {

using nlohmann::json;
using detail::overloaded;

std::string normalize_name(std::string s) {
  std::string out;
  for (char ch : s)
    if (ch != '_' && ch != '-' && ch != ' ')
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where.empty() ? key : where + "." + key, "missing");
  return *it;
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback,
                 const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return number(*it, where + "." + key);
}

std::vector<double> number_array(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> coeff_or_empty(const json& params, const char* key, const std::string& where) {
  auto it = params.find(key);
  if (it == params.end()) return {};
  if (it->is_number()) return {it->get<double>()};
  return number_array(*it, where + "." + key);
}

RateFamily parse_rate(const json& v, const std::string& where, std::optional<double>* bound) {
  if (v.is_number()) return RateFamily::constant(v.get<double>());
  const json& fam = require(v, "family", where);
  if (!fam.is_string()) throw ConfigError(where + ".family", "expected a string");
  const std::string name = normalize_name(fam.get<std::string>());
  static const json kEmpty = json::object();
  const json& params = v.contains("params") ? v.at("params") : kEmpty;
  if (!params.is_object()) throw ConfigError(where + ".params", "expected an object");
  const std::string pw = where + ".params";
  if (bound) {
    if (auto it = v.find("bound"); it != v.end()) *bound = number(*it, where + ".bound");
  }
  if (name == "constant") {
    const double c = params.contains("c") ? number(params.at("c"), pw + ".c")
                                          : number(require(params, "value", pw), pw + ".value");
    return RateFamily::constant(c);
  }
  if (name == "loadaffine")
    return RateFamily::load_affine(number(require(params, "c0", pw), pw + ".c0"),
                                   coeff_or_empty(params, "c", pw));
  if (name == "windowtimesloadaffine")
    return RateFamily::window_times(number(require(params, "delta", pw), pw + ".delta"),
                                    coeff_or_empty(params, "d", pw));
  if (name == "reciprocalloadaffine")
    return RateFamily::reciprocal(number(require(params, "tau", pw), pw + ".tau"),
                                  coeff_or_empty(params, "t", pw));
  throw ConfigError(where + ".family", "unknown rate family '" + fam.get<std::string>() + "'");
}

InitialLaw parse_law(const json& v, const std::string& where) {
  const json& fam = require(v, "family", where);
  if (!fam.is_string()) throw ConfigError(where + ".family", "expected a string");
  const std::string name = normalize_name(fam.get<std::string>());
  static const json kEmpty = json::object();
  const json& params = v.contains("params") ? v.at("params") : kEmpty;
  const std::string pw = where + ".params";
  if (name == "dirac" || name == "delta") return InitialLaw::dirac(number_or(params, "w0", 0.0, pw));
  if (name == "exponential")
    return InitialLaw::exponential(number(require(params, "mean", pw), pw + ".mean"));
  if (name == "uniform")
    return InitialLaw::uniform(number(require(params, "lo", pw), pw + ".lo"),
                               number(require(params, "hi", pw), pw + ".hi"));
  throw ConfigError(where + ".family", "unknown initial law '" + fam.get<std::string>() + "'");
}

json rate_to_json(const RateFamily& f, std::optional<double> bound) {
  json params = std::visit(
      overloaded{
          [](const family::Constant& c) { return json{{"c", c.c}}; },
          [](const family::LoadAffine& c) { return json{{"c0", c.c0}, {"c", c.coeff}}; },
          [](const family::WindowTimesLoadAffine& c) {
            return json{{"delta", c.delta}, {"d", c.coeff}};
          },
          [](const family::ReciprocalLoadAffine& c) { return json{{"tau", c.tau}, {"t", c.coeff}}; },
      },
      f.form());
  json out{{"family", std::string(f.name())}, {"params", params}};
  if (bound) out["bound"] = *bound;
  return out;
}

json law_to_json(const InitialLaw& l) {
  json params = std::visit(overloaded{
                               [](const law::Dirac& d) { return json{{"w0", d.w0}}; },
                               [](const law::Exponential& e) { return json{{"mean", e.mean}}; },
                               [](const law::Uniform& u) { return json{{"lo", u.lo}, {"hi", u.hi}}; },
                           },
                           l.form());
  return json{{"family", std::string(l.name())}, {"params", params}};
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

ModelConfig parse_config(std::string_view json_text) {
  const json doc = parse_json(json_text);
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");

  ModelConfig cfg;
  const json& nodes = require(doc, "nodes", "");
  if (!nodes.is_number_integer() || nodes.get<long long>() < 1)
    throw ConfigError("nodes", "expected a positive integer");
  cfg.nodes = nodes.get<std::size_t>();

  const json& classes = require(doc, "classes", "");
  if (!classes.is_array() || classes.empty())
    throw ConfigError("classes", "expected a nonempty array of class objects");
  const std::size_t K = classes.size();

  for (std::size_t k = 0; k < K; ++k) {
    const std::string where = "classes[" + std::to_string(k) + "]";
    const json& c = classes[k];
    if (!c.is_object()) throw ConfigError(where, "expected an object");
    ClassParams p;
    p.name = c.value("name", "class" + std::to_string(k + 1));
    p.lambda = parse_rate(require(c, "lambda", where), where + ".lambda", nullptr);
    p.mu = parse_rate(require(c, "mu", where), where + ".mu", nullptr);
    p.a = parse_rate(require(c, "a", where), where + ".a", &p.a_bound);
    p.b = parse_rate(require(c, "b", where), where + ".b", nullptr);
    p.r = number(require(c, "r", where), where + ".r");
    p.alpha = c.contains("alpha") ? parse_law(c.at("alpha"), where + ".alpha") : InitialLaw::dirac(0.0);
    p.initial_on_fraction = number_or(c, "initial_on_fraction", 0.0, where);
    cfg.classes.push_back(std::move(p));
  }

  const json& alloc = require(doc, "allocation", "");
  if (!alloc.is_array()) throw ConfigError("allocation", "expected an array");
  std::vector<double> flat;
  if (!alloc.empty() && alloc.front().is_array()) {
    if (alloc.size() != cfg.nodes)
      throw ConfigError("allocation", "expected " + std::to_string(cfg.nodes) + " rows");
    for (std::size_t j = 0; j < alloc.size(); ++j) {
      auto row = number_array(alloc[j], "allocation[" + std::to_string(j) + "]");
      if (row.size() != K)
        throw ConfigError("allocation[" + std::to_string(j) + "]",
                          "expected " + std::to_string(K) + " columns");
      flat.insert(flat.end(), row.begin(), row.end());
    }
  } else {
    flat = number_array(alloc, "allocation");
  }
  cfg.allocation = AllocationMatrix(cfg.nodes, K, std::move(flat));

  cfg.proportions = number_array(require(doc, "proportions", ""), "proportions");
  if (auto it = doc.find("load_box"); it != doc.end()) cfg.load_box = number_array(*it, "load_box");
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ModelConfig& cfg) {
  json doc;
  doc["nodes"] = cfg.nodes;
  json rows = json::array();
  for (std::size_t j = 0; j < cfg.allocation.nodes(); ++j) {
    json row = json::array();
    for (std::size_t k = 0; k < cfg.allocation.classes(); ++k) row.push_back(cfg.allocation(j, k));
    rows.push_back(row);
  }
  doc["allocation"] = rows;
  doc["proportions"] = cfg.proportions;
  if (!cfg.load_box.empty()) doc["load_box"] = cfg.load_box;
  json classes = json::array();
  for (const auto& c : cfg.classes) {
    classes.push_back(json{{"name", c.name},
                           {"lambda", rate_to_json(c.lambda, std::nullopt)},
                           {"mu", rate_to_json(c.mu, std::nullopt)},
                           {"a", rate_to_json(c.a, c.a_bound)},
                           {"b", rate_to_json(c.b, std::nullopt)},
                           {"r", c.r},
                           {"alpha", law_to_json(c.alpha)},
                           {"initial_on_fraction", c.initial_on_fraction}});
  }
  doc["classes"] = classes;
  return doc.dump();
}

std::string canonical_json(std::string_view json_text) { return parse_json(json_text).dump(); }

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mfaimd
