#pragma once

// Scalar-generic log-space recursions shared by the fine-scale HMMs, the
// coarse-scale chain and the decoders. All kernels take the t.p.m. in
// probability form, an initial distribution, and a T x N matrix whose row t
// holds the log observation density of every state at time t.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace hhmm {

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& values) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = values.maxCoeff();
    if (!std::isfinite(shift)) return shift;
    return std::log((values.array() - shift).exp().sum()) + shift;
}

/// Log-likelihood by the max-shifted forward recursion, O(N) memory:
///   phi_1 = log(delta) + l_1
///   phi_t = l_t + log(Gamma^T exp(phi_{t-1} - c_{t-1})) + c_{t-1}
///   return log(sum exp(phi_T - c_T)) + c_T
/// with c the running maximum of phi.
template <typename TpmDerived, typename InitDerived, typename EmDerived>
typename EmDerived::Scalar log_forward(const Eigen::MatrixBase<TpmDerived>& tpm,
                                       const Eigen::MatrixBase<InitDerived>& initial,
                                       const Eigen::MatrixBase<EmDerived>& log_emissions) {
    using Scalar = typename EmDerived::Scalar;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index steps = log_emissions.rows();
    const Eigen::Index n = log_emissions.cols();
    Vec phi = initial.array().log().matrix() + log_emissions.row(0).transpose();
    Vec scaled(n), mixed(n);
    for (Eigen::Index t = 1; t < steps; ++t) {
        const Scalar shift = phi.maxCoeff();
        if (shift == -std::numeric_limits<Scalar>::infinity()) return shift;
        scaled = (phi.array() - shift).exp().matrix();
        mixed.noalias() = tpm.transpose() * scaled;
        phi = mixed.array().log().matrix() + log_emissions.row(t).transpose();
        phi.array() += shift;
    }
    return log_sum_exp(phi);
}

/// Same recursion, retaining the full T x N table of log-forward values.
template <typename TpmDerived, typename InitDerived, typename EmDerived>
Eigen::Matrix<typename EmDerived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_forward_table(
    const Eigen::MatrixBase<TpmDerived>& tpm, const Eigen::MatrixBase<InitDerived>& initial,
    const Eigen::MatrixBase<EmDerived>& log_emissions) {
    using Scalar = typename EmDerived::Scalar;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index steps = log_emissions.rows();
    const Eigen::Index n = log_emissions.cols();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> table(steps, n);
    table.row(0) = initial.array().log().matrix().transpose() + log_emissions.row(0);
    Vec scaled(n), mixed(n);
    for (Eigen::Index t = 1; t < steps; ++t) {
        const Scalar shift = table.row(t - 1).maxCoeff();
        if (shift == -std::numeric_limits<Scalar>::infinity()) {
            table.bottomRows(steps - t).setConstant(shift);
            break;
        }
        scaled = (table.row(t - 1).array() - shift).exp().matrix().transpose();
        mixed.noalias() = tpm.transpose() * scaled;
        table.row(t) = (mixed.array().log() + shift).matrix().transpose() + log_emissions.row(t);
    }
    return table;
}

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
int argmax_lowest(const Eigen::DenseBase<Derived>& values) {
    int best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values(i) > values(best)) best = static_cast<int>(i);
    }
    return best;
}

/// Most probable state path (0-based) in the log domain:
///   kappa_1 = log(delta) + l_1
///   kappa_t(i) = max_j (kappa_{t-1}(j) + log gamma_ji) + l_t(i)
/// backtracked with S_T = argmax kappa_T and
/// S_t = argmax_i (kappa_t(i) + log gamma_{i, S_{t+1}}).
template <typename TpmDerived, typename InitDerived, typename EmDerived>
std::vector<int> viterbi_path(const Eigen::MatrixBase<TpmDerived>& tpm,
                              const Eigen::MatrixBase<InitDerived>& initial,
                              const Eigen::MatrixBase<EmDerived>& log_emissions) {
    using Scalar = typename EmDerived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index steps = log_emissions.rows();
    const Eigen::Index n = log_emissions.cols();
    std::vector<int> path(static_cast<std::size_t>(steps), 0);
    if (steps == 0) return path;

    const Mat log_tpm = tpm.array().log().matrix();
    Mat kappa(steps, n);
    kappa.row(0) = initial.array().log().matrix().transpose() + log_emissions.row(0);
    Vec candidates(n);
    for (Eigen::Index t = 1; t < steps; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
            candidates = kappa.row(t - 1).transpose() + log_tpm.col(i);
            kappa(t, i) = candidates.maxCoeff() + log_emissions(t, i);
        }
    }
    path.back() = argmax_lowest(kappa.row(steps - 1));
    for (Eigen::Index t = steps - 2; t >= 0; --t) {
        const int next = path[static_cast<std::size_t>(t + 1)];
        candidates = kappa.row(t).transpose() + log_tpm.col(next);
        path[static_cast<std::size_t>(t)] = argmax_lowest(candidates);
    }
    return path;
}

}  // namespace hhmm
