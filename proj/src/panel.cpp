#include "hhmm/panel.hpp"

#include <string>

#include "hhmm/error.hpp"

namespace hhmm {

ObservationPanel::ObservationPanel(Eigen::VectorXd coarse, std::vector<Eigen::VectorXd> fine,
                                   PanelMetadata metadata)
    : coarse_(std::move(coarse)), fine_(std::move(fine)), metadata_(std::move(metadata)) {
    if (coarse_.size() < 1) throw Error(ErrorKind::data, "panel needs at least one chunk");
    if (fine_.size() != static_cast<std::size_t>(coarse_.size())) {
        throw Error(ErrorKind::data, "panel has " + std::to_string(coarse_.size()) +
                                         " coarse values but " + std::to_string(fine_.size()) +
                                         " chunks");
    }
    if (!coarse_.allFinite()) throw Error(ErrorKind::data, "non-finite coarse observation");
    for (std::size_t t = 0; t < fine_.size(); ++t) {
        if (fine_[t].size() == 0) {
            throw Error(ErrorKind::data, "chunk " + std::to_string(t) + " is empty");
        }
        if (!fine_[t].allFinite()) {
            throw Error(ErrorKind::data, "non-finite fine observation in chunk " + std::to_string(t));
        }
    }
    if (!metadata_.fine_dates.empty()) {
        if (metadata_.fine_dates.size() != fine_.size()) {
            throw Error(ErrorKind::data, "date chunks do not match observation chunks");
        }
        for (std::size_t t = 0; t < fine_.size(); ++t) {
            if (metadata_.fine_dates[t].size() != static_cast<std::size_t>(fine_[t].size())) {
                throw Error(ErrorKind::data, "dates of chunk " + std::to_string(t) +
                                                 " do not match its observations");
            }
        }
    }
}

int ObservationPanel::n_fine_observations() const noexcept {
    int total = 0;
    for (const auto& c : fine_) total += static_cast<int>(c.size());
    return total;
}

}  // namespace hhmm
