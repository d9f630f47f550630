#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hhmm/distributions.hpp"

namespace hhmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Probabilities below this are raised to it before taking logs in
/// inverse_logit_link, so boundary matrices map to finite logits.
inline constexpr double kLogitFloor = 1e-10;

/// Row-stochastic N x N matrix; gamma(i, j) = P(next = j | current = i).
class TransitionMatrix {
public:
    /// Throws ErrorKind::invalid_parameter unless square, entries in [0, 1]
    /// and every row sums to 1 within 1e-12.
    explicit TransitionMatrix(Matrix probabilities);

    static TransitionMatrix identity(int n) { return TransitionMatrix(Matrix::Identity(n, n)); }
    static TransitionMatrix uniform(int n) {
        return TransitionMatrix(Matrix::Constant(n, n, 1.0 / n));
    }

    int n_states() const noexcept { return static_cast<int>(probabilities_.rows()); }
    const Matrix& matrix() const noexcept { return probabilities_; }
    double operator()(int i, int j) const { return probabilities_(i, j); }

    friend bool operator==(const TransitionMatrix& a, const TransitionMatrix& b) {
        return a.probabilities_ == b.probabilities_;
    }

private:
    Matrix probabilities_;
};

/// Solution of pi * Gamma = pi with sum(pi) = 1.
class StationaryDistribution {
public:
    explicit StationaryDistribution(Vector probabilities);

    const Vector& probabilities() const noexcept { return probabilities_; }
    double operator[](int i) const { return probabilities_[i]; }
    int size() const noexcept { return static_cast<int>(probabilities_.size()); }

private:
    Vector probabilities_;
};

/// Multinomial logit link. `eta_offdiag` holds the N(N-1) off-diagonal
/// logits row-major (diagonal skipped).
TransitionMatrix logit_link(std::span<const double> eta_offdiag, int n_states);

/// Inverse of logit_link: eta_ij = log(gamma_ij / gamma_ii). Off-diagonal
/// probabilities are raised to `floor` first. Throws ErrorKind::non_invertible
/// when a diagonal entry is zero.
Vector inverse_logit_link(const TransitionMatrix& tpm, double floor = kLogitFloor);

/// Dense solve of (Gamma^T - I) pi = 0 with the last equation replaced by
/// sum(pi) = 1. Throws ErrorKind::no_unique_stationary for singular systems.
StationaryDistribution stationary_distribution(const TransitionMatrix& tpm);

/// One fine-scale HMM: t.p.m., N* emissions, and optionally an explicit
/// initial distribution (the stationary distribution is used otherwise).
struct FineModel {
    TransitionMatrix tpm = TransitionMatrix::identity(1);
    std::vector<ScaledTDistribution> emissions{ScaledTDistribution{}};
    std::optional<Vector> initial;

    int n_states() const noexcept { return tpm.n_states(); }
    Vector initial_distribution() const;
};

class HierarchicalModel {
public:
    /// Validates dimensions: N coarse emissions, N fine models each with the
    /// same N* and N* emissions, initial vectors (if any) of matching size.
    HierarchicalModel(TransitionMatrix coarse_tpm, std::vector<ScaledTDistribution> coarse_emissions,
                      std::vector<FineModel> fine_models,
                      std::optional<Vector> coarse_initial = std::nullopt);

    int n_coarse() const noexcept { return coarse_tpm_.n_states(); }
    int n_fine() const noexcept { return fine_models_.front().n_states(); }

    const TransitionMatrix& coarse_tpm() const noexcept { return coarse_tpm_; }
    const std::vector<ScaledTDistribution>& coarse_emissions() const noexcept {
        return coarse_emissions_;
    }
    const std::vector<FineModel>& fine_models() const noexcept { return fine_models_; }
    const FineModel& fine_model(int i) const { return fine_models_.at(i); }
    const std::optional<Vector>& coarse_initial() const noexcept { return coarse_initial_; }

    /// Explicit coarse initial distribution, or the stationary one.
    Vector initial_distribution() const;

    /// True when any initial distribution is stored explicitly.
    bool has_free_initial() const noexcept;

private:
    TransitionMatrix coarse_tpm_;
    std::vector<ScaledTDistribution> coarse_emissions_;
    std::vector<FineModel> fine_models_;
    std::optional<Vector> coarse_initial_;
};

/// Emission parameters per state: location, log scale, log dof.
inline constexpr int kParamsPerEmission = 3;

/// Layout of the unconstrained vector:
///   coarse eta (row-major, diagonal skipped)
///   coarse emissions, state-major (location, log scale, log dof)
///   [coarse initial logits, N-1, state 1 is the reference]   if free_initial
///   then for each fine model i:
///     fine eta (row-major), fine emissions, [fine initial logits]
struct ParameterLayout {
    int n_coarse = 1;
    int n_fine = 1;
    bool free_initial = false;

    int coarse_block_size() const noexcept;
    int fine_block_size() const noexcept;
    int fine_block_offset(int i) const noexcept {
        return coarse_block_size() + i * fine_block_size();
    }
    int size() const noexcept { return coarse_block_size() + n_coarse * fine_block_size(); }
};

/// N(N-1) + N p + N N*(N*-1) + N N* p. Initial distributions are tied to the
/// stationary distributions and add nothing.
int parameter_count(int n_coarse, int n_fine, int params_per_emission = kParamsPerEmission);

/// Count for a layout, including initial-distribution logits when free.
int parameter_count(const ParameterLayout& layout);

Vector pack(const HierarchicalModel& model);
Vector pack(const HierarchicalModel& model, const ParameterLayout& layout);

/// Throws ErrorKind::layout on a length mismatch.
HierarchicalModel unpack(std::span<const double> values, const ParameterLayout& layout);
HierarchicalModel unpack(std::span<const double> values, int n_coarse, int n_fine);

/// Decode a single block of the vector; used by the block-wise gradient.
struct CoarseBlock {
    TransitionMatrix tpm;
    std::vector<ScaledTDistribution> emissions;
    std::optional<Vector> initial;
};
CoarseBlock unpack_coarse_block(std::span<const double> block, const ParameterLayout& layout);
FineModel unpack_fine_block(std::span<const double> block, const ParameterLayout& layout);

/// Relabel coarse states: new state k is old state order[k]. Rows/columns of
/// Gamma, coarse emissions and fine models move together.
HierarchicalModel permute_coarse_states(const HierarchicalModel& model, std::span<const int> order);

/// Relabel the fine states of fine model i.
HierarchicalModel permute_fine_states(const HierarchicalModel& model, int i,
                                      std::span<const int> order);

}  // namespace hhmm
