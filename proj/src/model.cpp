#include "hhmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hhmm/error.hpp"

namespace hhmm {

namespace {

constexpr double kRowSumTolerance = 1e-12;

void check_probability_vector(const Vector& p, const char* what) {
    if (p.size() == 0) throw Error(ErrorKind::invalid_parameter, std::string(what) + " is empty");
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
            throw Error(ErrorKind::invalid_parameter,
                        std::string(what) + " has an entry outside [0, 1]");
        }
    }
    if (std::fabs(p.sum() - 1.0) > kRowSumTolerance) {
        throw Error(ErrorKind::invalid_parameter, std::string(what) + " does not sum to 1");
    }
}

// Softmax with the first entry as reference (logit 0).
Vector reference_softmax(std::span<const double> logits) {
    double shift = 0.0;
    for (double v : logits) shift = std::max(shift, v);
    Vector p(static_cast<Eigen::Index>(logits.size()) + 1);
    p[0] = std::exp(-shift);
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[static_cast<Eigen::Index>(k) + 1] = std::exp(logits[k] - shift);
    }
    return p / p.sum();
}

void append_reference_logits(const Vector& p, std::vector<double>& out) {
    const double ref = std::max(p[0], kLogitFloor);
    for (Eigen::Index k = 1; k < p.size(); ++k) {
        out.push_back(std::log(std::max(p[k], kLogitFloor) / ref));
    }
}

void append_emissions(const std::vector<ScaledTDistribution>& emissions, std::vector<double>& out) {
    for (const auto& e : emissions) {
        out.push_back(e.location());
        out.push_back(std::log(e.scale()));
        out.push_back(std::log(e.dof()));
    }
}

std::vector<ScaledTDistribution> read_emissions(std::span<const double> values, int n) {
    std::vector<ScaledTDistribution> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        const auto base = static_cast<std::size_t>(k) * kParamsPerEmission;
        out.emplace_back(values[base], std::exp(values[base + 1]), std::exp(values[base + 2]));
    }
    return out;
}

void check_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::invalid_parameter, "non-finite entry in unconstrained vector");
        }
    }
}

}  // namespace

TransitionMatrix::TransitionMatrix(Matrix probabilities) : probabilities_(std::move(probabilities)) {
    if (probabilities_.rows() == 0 || probabilities_.rows() != probabilities_.cols()) {
        throw Error(ErrorKind::invalid_parameter, "transition matrix must be square and non-empty");
    }
    for (Eigen::Index i = 0; i < probabilities_.rows(); ++i) {
        for (Eigen::Index j = 0; j < probabilities_.cols(); ++j) {
            const double g = probabilities_(i, j);
            if (!(g >= 0.0 && g <= 1.0)) {
                throw Error(ErrorKind::invalid_parameter,
                            "transition probability outside [0, 1] at (" + std::to_string(i) +
                                ", " + std::to_string(j) + ")");
            }
        }
        if (std::fabs(probabilities_.row(i).sum() - 1.0) > kRowSumTolerance) {
            throw Error(ErrorKind::invalid_parameter,
                        "transition matrix row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

StationaryDistribution::StationaryDistribution(Vector probabilities)
    : probabilities_(std::move(probabilities)) {
    check_probability_vector(probabilities_, "stationary distribution");
}

TransitionMatrix logit_link(std::span<const double> eta_offdiag, int n_states) {
    const auto n = static_cast<std::size_t>(n_states);
    if (n_states < 1 || eta_offdiag.size() != n * (n - 1)) {
        throw Error(ErrorKind::layout, "logit_link expects N(N-1) logits");
    }
    check_finite(eta_offdiag);
    Matrix gamma(n_states, n_states);
    std::size_t idx = 0;
    for (int i = 0; i < n_states; ++i) {
        const auto row = eta_offdiag.subspan(idx, n - 1);
        double shift = 0.0;
        for (double v : row) shift = std::max(shift, v);
        // Diagonal has implicit logit 0.
        double denom = std::exp(-shift);
        for (double v : row) denom += std::exp(v - shift);
        std::size_t k = 0;
        for (int j = 0; j < n_states; ++j) {
            gamma(i, j) = j == i ? std::exp(-shift) / denom : std::exp(row[k++] - shift) / denom;
        }
        idx += n - 1;
    }
    return TransitionMatrix(std::move(gamma));
}

Vector inverse_logit_link(const TransitionMatrix& tpm, double floor) {
    const int n = tpm.n_states();
    Vector eta(n * (n - 1));
    Eigen::Index idx = 0;
    for (int i = 0; i < n; ++i) {
        const double diag = tpm(i, i);
        if (!(diag > 0.0)) {
            throw Error(ErrorKind::non_invertible,
                        "diagonal entry " + std::to_string(i) + " is zero; logit link not invertible");
        }
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            eta[idx++] = std::log(std::max(tpm(i, j), floor) / diag);
        }
    }
    return eta;
}

StationaryDistribution stationary_distribution(const TransitionMatrix& tpm) {
    const int n = tpm.n_states();
    Matrix system = tpm.matrix().transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs[n - 1] = 1.0;
    const Eigen::FullPivLU<Matrix> lu(system);
    if (!lu.isInvertible()) {
        throw Error(ErrorKind::no_unique_stationary,
                    "transition matrix has no unique stationary distribution");
    }
    Vector pi = lu.solve(rhs);
    if (!pi.allFinite() || pi.minCoeff() < -1e-9) {
        throw Error(ErrorKind::no_unique_stationary, "stationary solve is ill-conditioned");
    }
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    return StationaryDistribution(std::move(pi));
}

Vector FineModel::initial_distribution() const {
    if (initial) return *initial;
    return stationary_distribution(tpm).probabilities();
}

HierarchicalModel::HierarchicalModel(TransitionMatrix coarse_tpm,
                                     std::vector<ScaledTDistribution> coarse_emissions,
                                     std::vector<FineModel> fine_models,
                                     std::optional<Vector> coarse_initial)
    : coarse_tpm_(std::move(coarse_tpm)),
      coarse_emissions_(std::move(coarse_emissions)),
      fine_models_(std::move(fine_models)),
      coarse_initial_(std::move(coarse_initial)) {
    const auto n = static_cast<std::size_t>(coarse_tpm_.n_states());
    if (coarse_emissions_.size() != n) {
        throw Error(ErrorKind::shape, "need one coarse emission per coarse state");
    }
    if (fine_models_.size() != n) {
        throw Error(ErrorKind::shape, "need one fine model per coarse state");
    }
    const int n_fine = fine_models_.front().n_states();
    for (const auto& fm : fine_models_) {
        if (fm.n_states() != n_fine || fm.emissions.size() != static_cast<std::size_t>(n_fine)) {
            throw Error(ErrorKind::shape, "fine models must share N* states with N* emissions");
        }
        if (fm.initial) {
            if (fm.initial->size() != n_fine) {
                throw Error(ErrorKind::shape, "fine initial distribution has wrong length");
            }
            check_probability_vector(*fm.initial, "fine initial distribution");
        }
    }
    if (coarse_initial_) {
        if (coarse_initial_->size() != static_cast<Eigen::Index>(n)) {
            throw Error(ErrorKind::shape, "coarse initial distribution has wrong length");
        }
        check_probability_vector(*coarse_initial_, "coarse initial distribution");
    }
}

Vector HierarchicalModel::initial_distribution() const {
    if (coarse_initial_) return *coarse_initial_;
    return stationary_distribution(coarse_tpm_).probabilities();
}

bool HierarchicalModel::has_free_initial() const noexcept {
    if (coarse_initial_) return true;
    return std::any_of(fine_models_.begin(), fine_models_.end(),
                       [](const FineModel& fm) { return fm.initial.has_value(); });
}

int ParameterLayout::coarse_block_size() const noexcept {
    return n_coarse * (n_coarse - 1) + n_coarse * kParamsPerEmission +
           (free_initial ? n_coarse - 1 : 0);
}

int ParameterLayout::fine_block_size() const noexcept {
    return n_fine * (n_fine - 1) + n_fine * kParamsPerEmission + (free_initial ? n_fine - 1 : 0);
}

int parameter_count(int n_coarse, int n_fine, int params_per_emission) {
    return n_coarse * (n_coarse - 1) + n_coarse * params_per_emission +
           n_coarse * n_fine * (n_fine - 1) + n_coarse * n_fine * params_per_emission;
}

int parameter_count(const ParameterLayout& layout) { return layout.size(); }

Vector pack(const HierarchicalModel& model) {
    return pack(model, ParameterLayout{model.n_coarse(), model.n_fine(), model.has_free_initial()});
}

Vector pack(const HierarchicalModel& model, const ParameterLayout& layout) {
    if (layout.n_coarse != model.n_coarse() || layout.n_fine != model.n_fine()) {
        throw Error(ErrorKind::layout, "layout dimensions do not match the model");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(layout.size()));
    const Vector coarse_eta = inverse_logit_link(model.coarse_tpm());
    out.insert(out.end(), coarse_eta.data(), coarse_eta.data() + coarse_eta.size());
    append_emissions(model.coarse_emissions(), out);
    if (layout.free_initial) append_reference_logits(model.initial_distribution(), out);
    for (const auto& fm : model.fine_models()) {
        const Vector eta = inverse_logit_link(fm.tpm);
        out.insert(out.end(), eta.data(), eta.data() + eta.size());
        append_emissions(fm.emissions, out);
        if (layout.free_initial) append_reference_logits(fm.initial_distribution(), out);
    }
    return Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

CoarseBlock unpack_coarse_block(std::span<const double> block, const ParameterLayout& layout) {
    if (block.size() != static_cast<std::size_t>(layout.coarse_block_size())) {
        throw Error(ErrorKind::layout, "coarse block has wrong length");
    }
    check_finite(block);
    const auto n = static_cast<std::size_t>(layout.n_coarse);
    const std::size_t n_eta = n * (n - 1);
    const std::size_t n_em = n * kParamsPerEmission;
    CoarseBlock out{logit_link(block.subspan(0, n_eta), layout.n_coarse),
                    read_emissions(block.subspan(n_eta, n_em), layout.n_coarse), std::nullopt};
    if (layout.free_initial) out.initial = reference_softmax(block.subspan(n_eta + n_em, n - 1));
    return out;
}

FineModel unpack_fine_block(std::span<const double> block, const ParameterLayout& layout) {
    if (block.size() != static_cast<std::size_t>(layout.fine_block_size())) {
        throw Error(ErrorKind::layout, "fine block has wrong length");
    }
    check_finite(block);
    const auto n = static_cast<std::size_t>(layout.n_fine);
    const std::size_t n_eta = n * (n - 1);
    const std::size_t n_em = n * kParamsPerEmission;
    FineModel out{logit_link(block.subspan(0, n_eta), layout.n_fine),
                  read_emissions(block.subspan(n_eta, n_em), layout.n_fine), std::nullopt};
    if (layout.free_initial) out.initial = reference_softmax(block.subspan(n_eta + n_em, n - 1));
    return out;
}

HierarchicalModel unpack(std::span<const double> values, const ParameterLayout& layout) {
    if (layout.n_coarse < 1 || layout.n_fine < 1) {
        throw Error(ErrorKind::layout, "layout dimensions must be positive");
    }
    if (values.size() != static_cast<std::size_t>(layout.size())) {
        throw Error(ErrorKind::layout, "unconstrained vector has length " +
                                           std::to_string(values.size()) + ", layout expects " +
                                           std::to_string(layout.size()));
    }
    const auto coarse_size = static_cast<std::size_t>(layout.coarse_block_size());
    const auto fine_size = static_cast<std::size_t>(layout.fine_block_size());
    auto coarse = unpack_coarse_block(values.subspan(0, coarse_size), layout);
    std::vector<FineModel> fine;
    fine.reserve(static_cast<std::size_t>(layout.n_coarse));
    for (int i = 0; i < layout.n_coarse; ++i) {
        fine.push_back(unpack_fine_block(
            values.subspan(static_cast<std::size_t>(layout.fine_block_offset(i)), fine_size),
            layout));
    }
    return HierarchicalModel(std::move(coarse.tpm), std::move(coarse.emissions), std::move(fine),
                             std::move(coarse.initial));
}

HierarchicalModel unpack(std::span<const double> values, int n_coarse, int n_fine) {
    return unpack(values, ParameterLayout{n_coarse, n_fine, false});
}

namespace {

void check_permutation(std::span<const int> order, int n) {
    if (order.size() != static_cast<std::size_t>(n)) {
        throw Error(ErrorKind::shape, "permutation has wrong length");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int k : order) {
        if (k < 0 || k >= n || seen[static_cast<std::size_t>(k)]) {
            throw Error(ErrorKind::invalid_parameter, "not a permutation");
        }
        seen[static_cast<std::size_t>(k)] = true;
    }
}

Matrix permute_square(const Matrix& m, std::span<const int> order) {
    const auto n = static_cast<int>(order.size());
    Matrix out(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) out(a, b) = m(order[a], order[b]);
    }
    return out;
}

template <typename T>
std::vector<T> permute_items(const std::vector<T>& items, std::span<const int> order) {
    std::vector<T> out;
    out.reserve(items.size());
    for (int k : order) out.push_back(items[static_cast<std::size_t>(k)]);
    return out;
}

std::optional<Vector> permute_vector(const std::optional<Vector>& v, std::span<const int> order) {
    if (!v) return std::nullopt;
    Vector out(v->size());
    for (std::size_t k = 0; k < order.size(); ++k) out[static_cast<Eigen::Index>(k)] = (*v)[order[k]];
    return out;
}

}  // namespace

HierarchicalModel permute_coarse_states(const HierarchicalModel& model, std::span<const int> order) {
    check_permutation(order, model.n_coarse());
    return HierarchicalModel(TransitionMatrix(permute_square(model.coarse_tpm().matrix(), order)),
                             permute_items(model.coarse_emissions(), order),
                             permute_items(model.fine_models(), order),
                             permute_vector(model.coarse_initial(), order));
}

HierarchicalModel permute_fine_states(const HierarchicalModel& model, int i,
                                      std::span<const int> order) {
    check_permutation(order, model.n_fine());
    auto fine = model.fine_models();
    auto& fm = fine.at(static_cast<std::size_t>(i));
    fm = FineModel{TransitionMatrix(permute_square(fm.tpm.matrix(), order)),
                   permute_items(fm.emissions, order), permute_vector(fm.initial, order)};
    return HierarchicalModel(model.coarse_tpm(), model.coarse_emissions(), std::move(fine),
                             model.coarse_initial());
}

}  // namespace hhmm
