#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gngode/errors.hpp"
#include "gngode/numeric/tape.hpp"

namespace gngode {

enum class SolverKind { euler, rk4, dopri5 };

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::euler: return "euler";
    case SolverKind::rk4: return "rk4";
    case SolverKind::dopri5: return "dopri5";
  }
  return "?";
}

inline SolverKind parse_solver_kind(const std::string& s) {
  if (s == "euler") return SolverKind::euler;
  if (s == "rk4") return SolverKind::rk4;
  if (s == "dopri5") return SolverKind::dopri5;
  throw ConfigError("unknown solver '" + s + "' (expected euler, rk4 or dopri5)");
}

struct SolverConfig {
  SolverKind kind = SolverKind::rk4;
  std::size_t steps_per_unit = 7;  // fixed-step kinds: grid spacing 1/steps_per_unit
  double rtol = 1e-3;  // dopri5 only
  double atol = 1e-4;
  std::size_t max_steps = 1000;

  void validate() const {
    if (kind != SolverKind::dopri5 && steps_per_unit == 0) throw ConfigError("steps_per_unit must be positive");
    if (kind == SolverKind::dopri5 && (!(rtol > 0.0) || !(atol > 0.0))) {
      throw ConfigError("dopri5 tolerances must be positive");
    }
    if (max_steps == 0) throw ConfigError("max_steps must be positive");
  }
};

// Read-only views of a state's entries, used by the step controller.
inline std::span<const double> state_values(const double& x) { return {&x, 1}; }
inline std::span<const double> state_values(const Array& a) { return a.values(); }
inline std::span<const double> state_values(const Var& v) { return v.value().values(); }

template <class State>
bool state_finite(const State& s) {
  for (double v : state_values(s))
    if (!std::isfinite(v)) return false;
  return true;
}

/// Controller hook for states recorded on a tape: rejected trial steps are
/// rolled back so they leave no nodes behind.
struct NoRollback {
  std::size_t mark() const { return 0; }
  void rollback(std::size_t) const {}
};

struct TapeRollback {
  Tape* tape;
  std::size_t mark() const { return tape->size(); }
  void rollback(std::size_t m) const { tape->truncate(m); }
};

template <class State, class Rhs>
State euler_step(Rhs& f, double t, const State& y, double dt) {
  return y + dt * f(t, y);
}

/// Classical four-stage Runge-Kutta.
template <class State, class Rhs>
State rk4_step(Rhs& f, double t, const State& y, double dt) {
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * dt, y + (0.5 * dt) * k1);
  const State k3 = f(t + 0.5 * dt, y + (0.5 * dt) * k2);
  const State k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace dopri5 {
// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// 5th order weights minus the embedded 4th order weights.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

inline constexpr double kSafety = 0.9;
inline constexpr double kMinFactor = 0.2;
inline constexpr double kMaxFactor = 5.0;
inline constexpr double kBeta = 0.04;  // PI term
inline constexpr double kErrorFloor = 1e-10;
}  // namespace dopri5

template <class State>
struct Dopri5Step {
  State y;  // 5th order solution
  State k_end;  // f(t + dt, y): first stage of the next step
  double error = 0.0;  // RMS of err_i / (atol + rtol * max(|y0_i|, |y1_i|))
};

/// One Dormand-Prince step from (t, y) given k1 = f(t, y). Stage times are
/// clamped to at most `t_cap`.
template <class State, class Rhs>
Dopri5Step<State> dopri5_step(Rhs& f, double t, const State& y, const State& k1, double dt, double atol,
                              double rtol, double t_cap = std::numeric_limits<double>::infinity()) {
  using namespace dopri5;
  auto at = [&](double c) { return std::min(t + c * dt, t_cap); };
  const State k2 = f(at(c2), y + (dt * a21) * k1);
  const State k3 = f(at(c3), y + dt * (a31 * k1 + a32 * k2));
  const State k4 = f(at(c4), y + dt * (a41 * k1 + a42 * k2 + a43 * k3));
  const State k5 = f(at(c5), y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const State k6 = f(at(1.0), y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  State y_new = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  State k7 = f(at(1.0), y_new);

  const auto y0 = state_values(y), y1 = state_values(y_new);
  const auto s1 = state_values(k1), s3 = state_values(k3), s4 = state_values(k4), s5 = state_values(k5),
             s6 = state_values(k6), s7 = state_values(k7);
  double acc = 0.0;
  for (std::size_t i = 0; i < y0.size(); ++i) {
    const double err = dt * (e1 * s1[i] + e3 * s3[i] + e4 * s4[i] + e5 * s5[i] + e6 * s6[i] + e7 * s7[i]);
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    acc += (err / scale) * (err / scale);
  }
  const double error = y0.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(y0.size()));
  return {std::move(y_new), std::move(k7), error};
}

/// Step-size multiplier from the PI controller, clamped to [0.2, 5].
inline double dopri5_step_factor(double error, double previous_error, bool after_reject) {
  using namespace dopri5;
  const double err = std::max(error, kErrorFloor);
  const double prev = std::max(previous_error, kErrorFloor);
  double factor = kSafety * std::pow(err, -(0.2 - 0.75 * kBeta)) * std::pow(prev, kBeta);
  factor = std::clamp(factor, kMinFactor, kMaxFactor);
  if (after_reject) factor = std::min(factor, 1.0);
  return factor;
}

/// Fixed-step integration of f from t0 to t1 over `steps` equal steps.
template <class State, class Rhs>
State integrate_fixed(SolverKind kind, Rhs& f, State y, double t0, double t1, std::size_t steps) {
  if (t1 == t0) return y;
  if (steps == 0) throw ConfigError("fixed-step integration needs at least one step");
  const double dt = (t1 - t0) / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    y = kind == SolverKind::euler ? euler_step(f, t, y, dt) : rk4_step(f, t, y, dt);
  }
  return y;
}

struct AdaptiveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
};

/// Adaptive Dormand-Prince integration from t0 to t1. Every breakpoint in
/// (t0, t1) ends a step exactly; within a segment [a, b) stage times stay
/// strictly below b, so a right-hand side that jumps at b is seen as smooth.
template <class State, class Rhs, class Rollback = NoRollback>
State integrate_dopri5(Rhs& f, State y, double t0, double t1, std::vector<double> breakpoints,
                       const SolverConfig& cfg, Rollback rollback = {}, AdaptiveStats* stats = nullptr) {
  if (t1 == t0) return y;
  if (!(t1 > t0)) throw ConfigError("dopri5 integrates forward in time only");
  std::vector<double> ends;
  std::sort(breakpoints.begin(), breakpoints.end());
  for (double b : breakpoints)
    if (b > t0 && b < t1 && (ends.empty() || b > ends.back())) ends.push_back(b);
  ends.push_back(t1);

  AdaptiveStats local;
  AdaptiveStats& st = stats ? *stats : local;
  std::size_t attempts = 0;
  double t = t0;
  double h = 0.0;
  double prev_error = 1e-4;

  for (double seg_end : ends) {
    const double cap = std::nextafter(seg_end, t0);
    State k1 = f(t, y);
    ++st.rhs_evaluations;
    if (h == 0.0) {
      double d0 = 0.0, d1 = 0.0;
      const auto yv = state_values(y), fv = state_values(k1);
      for (std::size_t i = 0; i < yv.size(); ++i) {
        const double sc = cfg.atol + cfg.rtol * std::abs(yv[i]);
        d0 += (yv[i] / sc) * (yv[i] / sc);
        d1 += (fv[i] / sc) * (fv[i] / sc);
      }
      h = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * std::sqrt(d0 / d1);
      h = std::min(h, t1 - t0);
    }
    bool rejected_last = false;
    while (t < seg_end) {
      if (++attempts > cfg.max_steps) {
        throw IntegrationError(t, "dopri5 exceeded max_steps=" + std::to_string(cfg.max_steps));
      }
      const bool lands = t + h >= seg_end;
      const double dt = lands ? seg_end - t : h;
      const std::size_t mark = rollback.mark();
      auto step = dopri5_step(f, t, y, k1, dt, cfg.atol, cfg.rtol, cap);
      st.rhs_evaluations += 6;
      if (!state_finite(step.y)) throw IntegrationError(t, "dopri5 produced a non-finite state");
      if (step.error <= 1.0) {
        ++st.accepted;
        t = lands ? seg_end : t + dt;
        y = std::move(step.y);
        k1 = std::move(step.k_end);
        const double factor = dopri5_step_factor(step.error, prev_error, rejected_last);
        prev_error = std::max(step.error, dopri5::kErrorFloor);
        // A step shortened to hit the boundary should not shrink the next one.
        h = (lands ? std::max(h, dt) : dt) * factor;
        rejected_last = false;
      } else {
        ++st.rejected;
        rollback.rollback(mark);
        h = dt * dopri5_step_factor(step.error, prev_error, true);
        rejected_last = true;
      }
    }
  }
  return y;
}

}  // namespace gngode
