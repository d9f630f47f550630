#include "hhmm/simulation.hpp"

#include "hhmm/error.hpp"
#include "hhmm/random.hpp"

namespace hhmm {

Simulation simulate(const SimulationSpec& spec) {
    if (spec.t_coarse < 1 || spec.t_fine < 1) {
        throw Error(ErrorKind::invalid_parameter, "simulation needs T >= 1 and T* >= 1");
    }
    const auto& model = spec.model;
    Rng rng(spec.seed);

    std::vector<Vector> fine_initials;
    for (const auto& fm : model.fine_models()) fine_initials.push_back(fm.initial_distribution());
    const Matrix& gamma = model.coarse_tpm().matrix();

    Vector coarse(spec.t_coarse);
    std::vector<Vector> fine;
    fine.reserve(static_cast<std::size_t>(spec.t_coarse));
    DecodedStates truth;
    truth.coarse.reserve(static_cast<std::size_t>(spec.t_coarse));

    int state = rng.discrete(model.initial_distribution());
    for (int t = 0; t < spec.t_coarse; ++t) {
        if (t > 0) state = rng.discrete(gamma.row(state));
        truth.coarse.push_back(state);

        const auto& fm = model.fine_model(state);
        const Matrix& fine_gamma = fm.tpm.matrix();
        Vector chunk(spec.t_fine);
        std::vector<int> fine_states;
        fine_states.reserve(static_cast<std::size_t>(spec.t_fine));
        int fine_state = rng.discrete(fine_initials[static_cast<std::size_t>(state)]);
        for (int k = 0; k < spec.t_fine; ++k) {
            if (k > 0) fine_state = rng.discrete(fine_gamma.row(fine_state));
            fine_states.push_back(fine_state);
            chunk[k] = sample_one(fm.emissions[static_cast<std::size_t>(fine_state)], rng);
        }
        coarse[t] = spec.coarse_mode == CoarseMode::chunk_average
                        ? chunk.mean()
                        : sample_one(model.coarse_emissions()[static_cast<std::size_t>(state)], rng);
        fine.push_back(std::move(chunk));
        truth.fine.push_back(std::move(fine_states));
    }

    PanelMetadata meta;
    meta.chunk_length = spec.t_fine;
    return {ObservationPanel(std::move(coarse), std::move(fine), std::move(meta)), std::move(truth)};
}

}  // namespace hhmm
