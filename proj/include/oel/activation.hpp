#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace oel {

enum class ActKind { linear, relu, tanh };

/// Fast double tanh: 1 - 2/(exp(2z)+1). Vectorizable through exp and
/// accurate to ~1e-11 relative; exact at 0 and saturates correctly at +/-inf.
inline double fast_tanh(double z) { return 1.0 - 2.0 / (std::exp(2.0 * z) + 1.0); }

/// Element-wise activation with derivatives up to third order (the third
/// derivative feeds the six-derivative NTK descendants). relu uses the
/// sigma'(0) = 0 convention so runs are reproducible at the kink.
struct Activation {
  ActKind kind = ActKind::tanh;

  double f(double z) const {
    switch (kind) {
      case ActKind::linear: return z;
      case ActKind::relu: return z > 0.0 ? z : 0.0;
      case ActKind::tanh: return fast_tanh(z);
    }
    return 0.0;
  }
  double d1(double z) const {
    switch (kind) {
      case ActKind::linear: return 1.0;
      case ActKind::relu: return z > 0.0 ? 1.0 : 0.0;
      case ActKind::tanh: { double t = fast_tanh(z); return 1.0 - t * t; }
    }
    return 0.0;
  }
  double d2(double z) const {
    if (kind != ActKind::tanh) return 0.0;
    double t = fast_tanh(z);
    return -2.0 * t * (1.0 - t * t);
  }
  double d3(double z) const {
    if (kind != ActKind::tanh) return 0.0;
    double t = fast_tanh(z);
    return -2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t);
  }
};

inline ActKind act_from_string(const std::string& s) {
  if (s == "linear") return ActKind::linear;
  if (s == "relu") return ActKind::relu;
  if (s == "tanh") return ActKind::tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

inline const char* to_string(ActKind k) {
  switch (k) {
    case ActKind::linear: return "linear";
    case ActKind::relu: return "relu";
    case ActKind::tanh: return "tanh";
  }
  return "?";
}

}  // namespace oel
