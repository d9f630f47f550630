#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hhmm {

/// Provenance carried along with a panel; none of it enters the likelihood.
struct PanelMetadata {
    int chunk_length = 0;           // nominal T*; 0 when unknown
    int dropped_returns = 0;        // trailing returns not assigned to a chunk
    bool ragged = false;            // last chunk may be shorter than chunk_length
    std::vector<std::vector<std::string>> fine_dates;  // empty, or one date per fine observation
};

/// Coarse series X_1..X_T plus T chunks of fine observations. Chunk t may
/// hold a different number of observations (ragged final chunk).
class ObservationPanel {
public:
    /// Throws ErrorKind::data unless T >= 1, the chunk count equals T, every
    /// chunk is non-empty and every value is finite.
    ObservationPanel(Eigen::VectorXd coarse, std::vector<Eigen::VectorXd> fine,
                     PanelMetadata metadata = {});

    int n_chunks() const noexcept { return static_cast<int>(coarse_.size()); }
    const Eigen::VectorXd& coarse() const noexcept { return coarse_; }
    const std::vector<Eigen::VectorXd>& fine() const noexcept { return fine_; }
    const Eigen::VectorXd& chunk(int t) const { return fine_.at(static_cast<std::size_t>(t)); }
    std::span<const double> chunk_span(int t) const {
        const auto& c = chunk(t);
        return {c.data(), static_cast<std::size_t>(c.size())};
    }
    const PanelMetadata& metadata() const noexcept { return metadata_; }

    int n_fine_observations() const noexcept;

    /// Coarse plus fine observations; the sample size used by BIC.
    int total_observations() const noexcept { return n_chunks() + n_fine_observations(); }

    bool has_dates() const noexcept { return !metadata_.fine_dates.empty(); }

private:
    Eigen::VectorXd coarse_;
    std::vector<Eigen::VectorXd> fine_;
    PanelMetadata metadata_;
};

}  // namespace hhmm
