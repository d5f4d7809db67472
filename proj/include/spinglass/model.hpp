#pragma once

// ModelSpec (species + mixture) and the JSON model-file format:
//
//   { "species": [ {"name": "a", "lambda": 0.5}, ... ],
//     "terms":   [ {"degrees": {"a": 2}, "delta_sq": 1.0}, ... ] }
//
// Species omitted from a term's "degrees" map have degree 0.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "spinglass/mixture.hpp"

namespace spinglass {

inline constexpr const char* kToolVersion = "0.3.1";

/// Raised for malformed model files. The message names the offending field.
class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The asymptotic model: species proportions plus a base mixture.
class ModelSpec {
 public:
  ModelSpec() = default;
  ModelSpec(SpeciesSet species, Mixture mixture)
      : species_(std::move(species)), mixture_(std::move(mixture)) {
    if (mixture_.num_species() != species_.size())
      throw std::invalid_argument("mixture species count differs from species set");
    if (mixture_.min_degree() != 2)
      throw std::invalid_argument("base model mixtures must have min_degree 2");
  }

  const SpeciesSet& species() const { return species_; }
  const Mixture& mixture() const { return mixture_; }
  std::size_t num_species() const { return species_.size(); }
  SpeciesVector lambda() const { return species_.lambda_vector(); }
  double xi_one() const { return eval(mixture_, 1.0); }

 private:
  SpeciesSet species_;
  Mixture mixture_;
};

namespace models {

/// Single species, xi(x) = sum_p c_p x^p from (degree, coefficient) pairs.
inline ModelSpec single_species(std::initializer_list<std::pair<int, double>> terms) {
  Mixture::TermMap map;
  for (auto [deg, c] : terms) map[MultiIndex({deg})] += c;
  return ModelSpec(SpeciesSet::single(), Mixture(1, std::move(map)));
}

inline ModelSpec sk() { return single_species({{2, 1.0}}); }
inline ModelSpec pure_p_spin(int p) { return single_species({{p, 1.0}}); }

}  // namespace models

inline nlohmann::ordered_json to_json(const ModelSpec& model) {
  nlohmann::ordered_json j;
  j["species"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < model.num_species(); ++s)
    j["species"].push_back({{"name", model.species().name(s)}, {"lambda", model.species().lambda(s)}});
  j["terms"] = nlohmann::ordered_json::array();
  for (const auto& [p, c] : model.mixture().terms()) {
    nlohmann::ordered_json deg = nlohmann::ordered_json::object();
    for (std::size_t s = 0; s < p.size(); ++s)
      if (p[s] != 0) deg[model.species().name(s)] = p[s];
    j["terms"].push_back({{"degrees", deg}, {"delta_sq", c}});
  }
  return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
  auto require = [](const nlohmann::json& obj, const char* key, const std::string& where) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key))
      throw ModelFormatError("missing field '" + std::string(key) + "' in " + where);
    return obj.at(key);
  };

  const auto& species_json = require(j, "species", "model");
  if (!species_json.is_array() || species_json.empty())
    throw ModelFormatError("field 'species' must be a non-empty array");
  std::vector<std::string> names;
  std::vector<double> lambda;
  for (std::size_t i = 0; i < species_json.size(); ++i) {
    const std::string where = "species[" + std::to_string(i) + "]";
    const auto& name = require(species_json[i], "name", where);
    const auto& lam = require(species_json[i], "lambda", where);
    if (!name.is_string()) throw ModelFormatError("field 'name' in " + where + " must be a string");
    if (!lam.is_number()) throw ModelFormatError("field 'lambda' in " + where + " must be a number");
    names.push_back(name.get<std::string>());
    lambda.push_back(lam.get<double>());
  }
  SpeciesSet species = [&] {
    try {
      return SpeciesSet(names, lambda);
    } catch (const std::invalid_argument& e) {
      throw ModelFormatError(std::string("invalid field 'species': ") + e.what());
    }
  }();

  const auto& terms_json = require(j, "terms", "model");
  if (!terms_json.is_array()) throw ModelFormatError("field 'terms' must be an array");
  Mixture::TermMap terms;
  for (std::size_t i = 0; i < terms_json.size(); ++i) {
    const std::string where = "terms[" + std::to_string(i) + "]";
    const auto& deg = require(terms_json[i], "degrees", where);
    const auto& c = require(terms_json[i], "delta_sq", where);
    if (!deg.is_object()) throw ModelFormatError("field 'degrees' in " + where + " must be an object");
    if (!c.is_number()) throw ModelFormatError("field 'delta_sq' in " + where + " must be a number");
    std::vector<int> d(species.size(), 0);
    for (const auto& [name, v] : deg.items()) {
      if (!v.is_number_integer() || v.get<int>() < 0)
        throw ModelFormatError("field 'degrees." + name + "' in " + where + " must be a nonnegative integer");
      try {
        d[species.index_of(name)] = v.get<int>();
      } catch (const std::invalid_argument&) {
        throw ModelFormatError("field 'degrees' in " + where + " names unknown species '" + name + "'");
      }
    }
    MultiIndex p(std::move(d));
    if (terms.contains(p)) throw ModelFormatError("duplicate multi-index in " + where);
    terms.emplace(std::move(p), c.get<double>());
  }
  try {
    return ModelSpec(std::move(species), Mixture(names.size(), std::move(terms)));
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(std::string("invalid field 'terms': ") + e.what());
  }
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelFormatError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelFormatError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

/// FNV-1a over the canonical JSON serialization, as 16 hex digits.
inline std::string model_hash(const ModelSpec& model) {
  const std::string text = to_json(model).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spinglass
