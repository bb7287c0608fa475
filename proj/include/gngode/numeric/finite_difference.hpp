#pragma once

#include <concepts>

#include "gngode/errors.hpp"
#include "gngode/numeric/array.hpp"

namespace gngode {

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h per entry.
template <class F>
  requires std::invocable<F&, const Array&>
Array finite_difference_gradient(F&& f, const Array& x, double h = 1e-5) {
  if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
  Array grad(x.shape());
  Array probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = static_cast<double>(f(probe));
    probe[i] = orig - h;
    const double down = static_cast<double>(f(probe));
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace gngode
