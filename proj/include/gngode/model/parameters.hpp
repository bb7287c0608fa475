#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "gngode/errors.hpp"
#include "gngode/numeric/tape.hpp"

namespace gngode {

using Rng = std::mt19937_64;
using VarMap = std::map<std::string, Var>;

/// Uniform in [-bound, bound), drawn from the top 53 bits of the generator so
/// the stream does not depend on the standard library's distributions.
inline double uniform_symmetric(Rng& rng, double bound) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

inline Array uniform_array(Shape shape, double bound, Rng& rng) {
  Array a(std::move(shape));
  for (double& v : a.values()) v = uniform_symmetric(rng, bound);
  return a;
}

inline Var require_var(const VarMap& vars, const std::string& name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

inline double parameter_l2(const ParameterSet& params) {
  double s = 0.0;
  for (const auto& [name, a] : params)
    for (double v : a.values()) s += v * v;
  return s;
}

}  // namespace gngode
