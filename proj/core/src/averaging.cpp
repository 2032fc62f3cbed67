#include "mfrl/averaging.hpp"

#include <string>

#include "mfrl/error.hpp"

namespace mfrl {

namespace {

void check_same_layout(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.size() != b.size() || a.shapes() != b.shapes()) {
    throw DimensionError(std::string(what) + ": snapshot length " + std::to_string(b.size()) +
                         " does not match accumulator length " + std::to_string(a.size()));
  }
}

}  // namespace

void swa_accumulate(SwaState& state, const ParamVector& snapshot) {
  if (state.count == 0) {
    state.running_mean = snapshot;
    state.count = 1;
    return;
  }
  check_same_layout(state.running_mean, snapshot, "swa_accumulate");
  const double inv = 1.0 / static_cast<double>(state.count + 1);
  auto mean = state.running_mean.values();
  const auto s = snapshot.values();
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (s[i] - mean[i]) * inv;
  ++state.count;
}

EmaState make_ema(double a) {
  if (!(a >= 0.0 && a <= 1.0)) {
    throw ConfigError("EMA forgetting factor must lie in [0, 1], got " + std::to_string(a));
  }
  EmaState state;
  state.a = a;
  return state;
}

void ema_update(EmaState& state, const ParamVector& snapshot) {
  if (!(state.a >= 0.0 && state.a <= 1.0)) {
    throw ConfigError("EMA forgetting factor must lie in [0, 1], got " + std::to_string(state.a));
  }
  if (!state.initialized) {
    state.avg = snapshot;
    state.initialized = true;
    return;
  }
  check_same_layout(state.avg, snapshot, "ema_update");
  auto avg = state.avg.values();
  const auto s = snapshot.values();
  const double a = state.a;
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = a * avg[i] + (1.0 - a) * s[i];
}

}  // namespace mfrl
