#pragma once

#include <span>
#include <vector>

#include "hhmm/model.hpp"
#include "hhmm/panel.hpp"

namespace hhmm {

/// Returned by negative_log_likelihood when the vector does not describe a
/// usable model (no unique stationary distribution, overflowing parameters).
inline constexpr double kObjectivePenalty = 1e10;

/// T* x N* matrix of log f*(k)(x) for every observation and state.
Matrix emission_log_densities(const std::vector<ScaledTDistribution>& emissions,
                              std::span<const double> observations);

/// Log-likelihood of one chunk under a fine-scale HMM started from its
/// initial (by default stationary) distribution.
double fine_log_likelihood(const FineModel& fine_model, std::span<const double> chunk);

/// Fine log-likelihood of every chunk under one fine model (length T).
Vector chunk_log_likelihoods(const FineModel& fine_model, const ObservationPanel& panel);

/// T x N matrix of per-chunk fine log-likelihoods, column i under fine model i.
Matrix chunk_log_likelihood_matrix(const HierarchicalModel& model, const ObservationPanel& panel);

/// T x N matrix of log f(i)(X_t) + log L*(i)(chunk t): the combined
/// observation term of the coarse chain.
Matrix coarse_log_observation_terms(const HierarchicalModel& model, const ObservationPanel& panel);

/// Coarse forward pass given precomputed per-chunk fine log-likelihoods.
double coarse_log_likelihood(const TransitionMatrix& tpm, const Vector& initial,
                             const std::vector<ScaledTDistribution>& emissions,
                             const Eigen::VectorXd& coarse_observations,
                             const Matrix& chunk_log_likelihoods);

/// Full two-level log-likelihood.
double hhmm_log_likelihood(const HierarchicalModel& model, const ObservationPanel& panel);

/// Retained log-forward values: coarse T x N, and optionally per chunk t and
/// fine model i the T*_t x N* fine table.
struct LogForwardTable {
    Matrix coarse;
    std::vector<std::vector<Matrix>> fine;  // fine[t][i]; empty unless requested
};

LogForwardTable log_forward_tables(const HierarchicalModel& model, const ObservationPanel& panel,
                                   bool retain_fine = false);

/// -hhmm_log_likelihood(unpack(values)). Initial distributions follow the
/// layout (stationary unless free_initial). Returns kObjectivePenalty when the
/// vector cannot be turned into a model or the value is not finite.
double negative_log_likelihood(std::span<const double> values, const ObservationPanel& panel,
                               const ParameterLayout& layout);

double negative_log_likelihood(std::span<const double> values, const ObservationPanel& panel,
                               int n_coarse, int n_fine);

}  // namespace hhmm
