#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "gngode/gngode.hpp"

namespace gngode::testing {

inline Array random_array(Shape shape, Rng& rng, double bound = 1.0) { return uniform_array(std::move(shape), bound, rng); }

/// Scalar built from a fresh tape given bound parameters.
using ScalarBuilder = std::function<Var(Tape&, const VarMap&)>;

inline double evaluate_scalar(const ParameterSet& params, const ScalarBuilder& build) {
  Tape tape;
  return build(tape, tape.bind(params)).value()[0];
}

/// Relative error between backward() and central differences, per parameter.
inline std::map<std::string, double> gradient_errors(const ParameterSet& params, const ScalarBuilder& build,
                                                     double h = 1e-5) {
  Tape tape;
  const auto vars = tape.bind(params);
  const GradientMap grads = tape.backward(build(tape, vars));
  std::map<std::string, double> errors;
  for (const auto& [name, value] : params) {
    ParameterSet probe = params;
    const Array fd = finite_difference_gradient(
        [&](const Array& x) {
          probe[name] = x;
          return evaluate_scalar(probe, build);
        },
        value, h);
    errors[name] = relative_error(grads.at(name), fd);
  }
  return errors;
}

inline Session make_session(std::initializer_list<std::pair<std::size_t, double>> clicks, std::string id = "s") {
  Session s{std::move(id), {}};
  for (auto [item, t] : clicks) s.clicks.push_back(Click{item, t});
  return s;
}

/// Random session over `items` items with strictly increasing timestamps.
inline Session random_session(Rng& rng, std::size_t length, std::size_t items) {
  Session s{"r", {}};
  double t = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    t += 1.0 + 10.0 * (uniform_symmetric(rng, 1.0) + 1.0);
    s.clicks.push_back(Click{static_cast<std::size_t>(rng() % items), t});
  }
  return s;
}

}  // namespace gngode::testing
