#pragma once

#include <vector>

#include "hhmm/model.hpp"
#include "hhmm/panel.hpp"

namespace hhmm {

/// Decoded (or simulated ground-truth) state sequences. States are stored
/// 0-based; file formats write them 1-based.
struct DecodedStates {
    std::vector<int> coarse;             // length T
    std::vector<std::vector<int>> fine;  // chunk t has T*_t entries

    friend bool operator==(const DecodedStates&, const DecodedStates&) = default;
};

/// Viterbi path for a single chain; `emission_logliks` is T x N. Ties in any
/// argmax resolve to the lowest state index.
std::vector<int> viterbi(const TransitionMatrix& tpm, const Vector& initial,
                         const Matrix& emission_logliks);

/// Coarse Viterbi on log f(i)(X_t) + log L*(i)(chunk t), then fine Viterbi
/// inside every chunk under the fine model of its decoded coarse state.
DecodedStates decode_hierarchical(const HierarchicalModel& model, const ObservationPanel& panel);

/// log P(path, observations) for a single chain.
double path_log_probability(const TransitionMatrix& tpm, const Vector& initial,
                            const Matrix& emission_logliks, const std::vector<int>& path);

/// Throws ErrorKind::shape unless the decoded lengths match the panel and
/// every state index lies in range.
void check_consistent(const DecodedStates& states, const ObservationPanel& panel, int n_coarse,
                      int n_fine);

}  // namespace hhmm
