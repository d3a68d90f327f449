#pragma once

// Built-in reproduction fixture: an unstable third-order plant with a
// reliable but noisy channel y1 and an accurate channel y2 that an attacker
// can drop.

#include <string>
#include <vector>

#include "switchguard/switched_model.hpp"

namespace switchguard::fixtures {

ChannelPlant example_plant();
/// Mode 0 delivers {y1, y2}; mode 1 delivers only y1.
std::vector<SelectionMask> example_patterns();
/// Initial state used in the published example.
Vector example_initial_state();

inline constexpr double published_nominal_gamma = 5.0275;
inline constexpr double published_switching_gamma = 32.5;

/// Published nominal estimator taps T(0), T(1).
std::vector<Matrix> published_nominal_taps();
/// Published switching taps T^1(0..4) and T^2(0..4). The first family is read
/// as the nominal mode and the second as the attacked mode.
std::vector<Matrix> published_switching_taps(int family);

}  // namespace switchguard::fixtures
