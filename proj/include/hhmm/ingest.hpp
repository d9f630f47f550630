#pragma once

#include <istream>
#include <string>
#include <vector>

#include "hhmm/panel.hpp"

namespace hhmm {

/// Daily closing prices with strictly increasing ISO-8601 dates.
struct PriceSeries {
    std::vector<std::string> dates;
    std::vector<double> closes;
};

struct DatedReturns {
    std::vector<std::string> dates;  // date of the later price
    std::vector<double> values;
};

enum class RaggedPolicy { drop, keep };

/// Reads a CSV with a header containing `date` and `close` columns (case
/// insensitive, other columns ignored). Throws ErrorKind::data naming the
/// offending line for malformed dates, non-numeric or non-positive closes,
/// and dates that are not strictly increasing.
PriceSeries read_prices_csv(std::istream& in);

/// ln(I_t / I_{t-1}) aligned to the later date. Throws ErrorKind::data for a
/// non-positive price and ErrorKind::insufficient_data for fewer than 2 rows.
DatedReturns log_returns(const PriceSeries& prices);

/// Consecutive non-overlapping chunks of `chunk_length` returns starting at
/// the first return; the coarse observation of a chunk is its mean. A
/// trailing partial chunk is dropped (counted in the metadata) or kept as a
/// shorter final chunk. Throws ErrorKind::insufficient_data when no full
/// chunk fits.
ObservationPanel build_panel(const DatedReturns& returns, int chunk_length = 30,
                             RaggedPolicy policy = RaggedPolicy::drop);

/// True for a valid calendar date written YYYY-MM-DD.
bool is_iso_date(const std::string& s);

}  // namespace hhmm
