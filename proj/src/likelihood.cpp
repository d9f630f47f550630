#include "hhmm/likelihood.hpp"

#include <cmath>

#include "hhmm/error.hpp"
#include "hhmm/forward.hpp"

namespace hhmm {

namespace {

void fill_log_densities(const std::vector<TLogDensity>& kernels, std::span<const double> obs,
                        Matrix& out) {
    const auto rows = static_cast<Eigen::Index>(obs.size());
    if (out.rows() < rows || out.cols() != static_cast<Eigen::Index>(kernels.size())) {
        out.resize(rows, static_cast<Eigen::Index>(kernels.size()));
    }
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        for (Eigen::Index t = 0; t < rows; ++t) {
            out(t, col) = kernels[k](obs[static_cast<std::size_t>(t)]);
        }
    }
}

std::vector<TLogDensity> make_kernels(const std::vector<ScaledTDistribution>& emissions) {
    return {emissions.begin(), emissions.end()};
}

}  // namespace

Matrix emission_log_densities(const std::vector<ScaledTDistribution>& emissions,
                              std::span<const double> observations) {
    Matrix out(static_cast<Eigen::Index>(observations.size()),
               static_cast<Eigen::Index>(emissions.size()));
    fill_log_densities(make_kernels(emissions), observations, out);
    return out;
}

double fine_log_likelihood(const FineModel& fine_model, std::span<const double> chunk) {
    if (chunk.empty()) throw Error(ErrorKind::shape, "fine chunk is empty");
    const Matrix log_dens = emission_log_densities(fine_model.emissions, chunk);
    return log_forward(fine_model.tpm.matrix(), fine_model.initial_distribution(), log_dens);
}

Vector chunk_log_likelihoods(const FineModel& fine_model, const ObservationPanel& panel) {
    const auto kernels = make_kernels(fine_model.emissions);
    const Vector initial = fine_model.initial_distribution();
    const Matrix& tpm = fine_model.tpm.matrix();
    Vector out(panel.n_chunks());
    Matrix buffer;
    for (int t = 0; t < panel.n_chunks(); ++t) {
        const auto chunk = panel.chunk_span(t);
        fill_log_densities(kernels, chunk, buffer);
        out[t] = log_forward(tpm, initial, buffer.topRows(static_cast<Eigen::Index>(chunk.size())));
    }
    return out;
}

Matrix chunk_log_likelihood_matrix(const HierarchicalModel& model, const ObservationPanel& panel) {
    Matrix out(panel.n_chunks(), model.n_coarse());
    for (int i = 0; i < model.n_coarse(); ++i) {
        out.col(i) = chunk_log_likelihoods(model.fine_model(i), panel);
    }
    return out;
}

Matrix coarse_log_observation_terms(const HierarchicalModel& model, const ObservationPanel& panel) {
    Matrix terms = chunk_log_likelihood_matrix(model, panel);
    const auto& x = panel.coarse();
    terms += emission_log_densities(model.coarse_emissions(), {x.data(), static_cast<std::size_t>(x.size())});
    return terms;
}

double coarse_log_likelihood(const TransitionMatrix& tpm, const Vector& initial,
                             const std::vector<ScaledTDistribution>& emissions,
                             const Eigen::VectorXd& coarse_observations,
                             const Matrix& chunk_log_likelihoods) {
    Matrix terms = emission_log_densities(
        emissions, {coarse_observations.data(), static_cast<std::size_t>(coarse_observations.size())});
    terms += chunk_log_likelihoods;
    return log_forward(tpm.matrix(), initial, terms);
}

double hhmm_log_likelihood(const HierarchicalModel& model, const ObservationPanel& panel) {
    return coarse_log_likelihood(model.coarse_tpm(), model.initial_distribution(),
                                 model.coarse_emissions(), panel.coarse(),
                                 chunk_log_likelihood_matrix(model, panel));
}

LogForwardTable log_forward_tables(const HierarchicalModel& model, const ObservationPanel& panel,
                                   bool retain_fine) {
    LogForwardTable out;
    if (retain_fine) {
        out.fine.resize(static_cast<std::size_t>(panel.n_chunks()));
        std::vector<Vector> initials;
        for (const auto& fm : model.fine_models()) initials.push_back(fm.initial_distribution());
        for (int t = 0; t < panel.n_chunks(); ++t) {
            for (int i = 0; i < model.n_coarse(); ++i) {
                const auto& fm = model.fine_model(i);
                out.fine[static_cast<std::size_t>(t)].push_back(log_forward_table(
                    fm.tpm.matrix(), initials[static_cast<std::size_t>(i)],
                    emission_log_densities(fm.emissions, panel.chunk_span(t))));
            }
        }
    }
    out.coarse = log_forward_table(model.coarse_tpm().matrix(), model.initial_distribution(),
                                   coarse_log_observation_terms(model, panel));
    return out;
}

double negative_log_likelihood(std::span<const double> values, const ObservationPanel& panel,
                               const ParameterLayout& layout) {
    if (values.size() != static_cast<std::size_t>(layout.size())) {
        throw Error(ErrorKind::layout, "unconstrained vector does not match the layout");
    }
    double value = kObjectivePenalty;
    try {
        value = -hhmm_log_likelihood(unpack(values, layout), panel);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::shape) throw;
        return kObjectivePenalty;
    }
    return std::isfinite(value) ? value : kObjectivePenalty;
}

double negative_log_likelihood(std::span<const double> values, const ObservationPanel& panel,
                               int n_coarse, int n_fine) {
    return negative_log_likelihood(values, panel, ParameterLayout{n_coarse, n_fine, false});
}

}  // namespace hhmm
