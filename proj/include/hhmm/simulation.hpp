#pragma once

#include <cstdint>

#include "hhmm/decoding.hpp"
#include "hhmm/model.hpp"
#include "hhmm/panel.hpp"

namespace hhmm {

enum class CoarseMode {
    independent_emission,  // X_t drawn from f(S_t); matches the likelihood
    chunk_average,         // X_t = mean of chunk t, as in the real-data pipeline
};

struct SimulationSpec {
    HierarchicalModel model;
    int t_coarse = 1;
    int t_fine = 1;
    std::uint64_t seed = 0;
    CoarseMode coarse_mode = CoarseMode::independent_emission;
};

struct Simulation {
    ObservationPanel panel;
    DecodedStates truth;
};

/// Coarse chain from delta then Gamma; each chunk restarts its fine chain
/// from delta*(S_t). Throws ErrorKind::invalid_parameter for T or T* < 1.
Simulation simulate(const SimulationSpec& spec);

}  // namespace hhmm
