#pragma once

#include <cstdint>

#include "mfrl/nn.hpp"

namespace mfrl {

// Tail stochastic weight averaging: the arithmetic mean of end-of-epoch
// snapshots taken after the SGD phase.
struct SwaState {
  ParamVector running_mean;
  std::int64_t count = 0;
};

// mean <- mean + (snapshot - mean) / (count + 1)
void swa_accumulate(SwaState& state, const ParamVector& snapshot);

// Exponential moving average avg <- a * avg + (1 - a) * new.
struct EmaState {
  ParamVector avg;
  double a = 0.99;
  bool initialized = false;
};

EmaState make_ema(double a);

// The first update seeds avg with the snapshot when the state is empty.
void ema_update(EmaState& state, const ParamVector& snapshot);

}  // namespace mfrl
