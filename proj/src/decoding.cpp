#include "hhmm/decoding.hpp"

#include <cmath>
#include <string>

#include "hhmm/error.hpp"
#include "hhmm/forward.hpp"
#include "hhmm/likelihood.hpp"

namespace hhmm {

std::vector<int> viterbi(const TransitionMatrix& tpm, const Vector& initial,
                         const Matrix& emission_logliks) {
    if (emission_logliks.cols() != tpm.n_states() || initial.size() != tpm.n_states()) {
        throw Error(ErrorKind::shape, "viterbi inputs disagree on the number of states");
    }
    return viterbi_path(tpm.matrix(), initial, emission_logliks);
}

DecodedStates decode_hierarchical(const HierarchicalModel& model, const ObservationPanel& panel) {
    DecodedStates out;
    out.coarse = viterbi(model.coarse_tpm(), model.initial_distribution(),
                         coarse_log_observation_terms(model, panel));
    std::vector<Vector> initials;
    for (const auto& fm : model.fine_models()) initials.push_back(fm.initial_distribution());
    out.fine.reserve(static_cast<std::size_t>(panel.n_chunks()));
    for (int t = 0; t < panel.n_chunks(); ++t) {
        const int state = out.coarse[static_cast<std::size_t>(t)];
        const auto& fm = model.fine_model(state);
        out.fine.push_back(viterbi(fm.tpm, initials[static_cast<std::size_t>(state)],
                                   emission_log_densities(fm.emissions, panel.chunk_span(t))));
    }
    return out;
}

double path_log_probability(const TransitionMatrix& tpm, const Vector& initial,
                            const Matrix& emission_logliks, const std::vector<int>& path) {
    if (path.size() != static_cast<std::size_t>(emission_logliks.rows())) {
        throw Error(ErrorKind::shape, "path length does not match the observations");
    }
    if (path.empty()) return 0.0;
    double total = std::log(initial[path[0]]) + emission_logliks(0, path[0]);
    for (std::size_t t = 1; t < path.size(); ++t) {
        total += std::log(tpm(path[t - 1], path[t])) +
                 emission_logliks(static_cast<Eigen::Index>(t), path[t]);
    }
    return total;
}

void check_consistent(const DecodedStates& states, const ObservationPanel& panel, int n_coarse,
                      int n_fine) {
    if (states.coarse.size() != static_cast<std::size_t>(panel.n_chunks()) ||
        states.fine.size() != states.coarse.size()) {
        throw Error(ErrorKind::shape, "decoded states do not match the panel's chunk count");
    }
    for (std::size_t t = 0; t < states.coarse.size(); ++t) {
        const int s = states.coarse[t];
        if (s < 0 || s >= n_coarse) {
            throw Error(ErrorKind::shape, "coarse state out of range at chunk " + std::to_string(t));
        }
        if (states.fine[t].size() != static_cast<std::size_t>(panel.chunk(static_cast<int>(t)).size())) {
            throw Error(ErrorKind::shape, "fine states of chunk " + std::to_string(t) +
                                              " do not match its length");
        }
        for (int f : states.fine[t]) {
            if (f < 0 || f >= n_fine) {
                throw Error(ErrorKind::shape, "fine state out of range in chunk " + std::to_string(t));
            }
        }
    }
}

}  // namespace hhmm
