#pragma once

// File formats. Every reader validates the document and throws
// ErrorKind::data with the offending field on a schema violation.
//
// model.json (format "hhmm-model/1")
//   n_coarse, n_fine        integers
//   coarse_tpm              N x N array of rows
//   coarse_emissions        N objects {location, scale, dof}
//   coarse_initial          optional length-N array (absent: stationary)
//   fine_models             N objects {fine_tpm, emissions, initial?}
//
// panel.json (format "hhmm-panel/1")
//   coarse                  length-T array
//   fine                    T arrays (chunk t holds T*_t values)
//   metadata                {chunk_length, dropped_returns, ragged,
//                            date_ranges: [{first, last}], fine_dates?}
//
// decoded.csv / truth.csv
//   [date,]coarse_state,fine_state,observation   one row per fine point,
//   states 1-based; the date column is present iff the panel has dates.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hhmm/decoding.hpp"
#include "hhmm/diagnostics.hpp"
#include "hhmm/estimation.hpp"
#include "hhmm/model.hpp"
#include "hhmm/panel.hpp"

namespace hhmm {

using Json = nlohmann::ordered_json;

inline constexpr const char* kModelFormat = "hhmm-model/1";
inline constexpr const char* kPanelFormat = "hhmm-panel/1";

Json model_to_json(const HierarchicalModel& model);
HierarchicalModel model_from_json(const Json& doc);

Json panel_to_json(const ObservationPanel& panel);
ObservationPanel panel_from_json(const Json& doc);

Json fit_result_to_json(const FitResult& result);
Json run_diagnostics_to_json(const std::vector<RunDiagnostics>& runs);

Json residual_report_to_json(const ResidualReport& report);

void write_decoded_csv(std::ostream& out, const ObservationPanel& panel, const DecodedStates& states);

/// Reads decoded states back against the panel they were produced from;
/// throws ErrorKind::data on row-count or observation mismatches.
DecodedStates read_decoded_csv(std::istream& in, const ObservationPanel& panel);

void write_qq_csv(std::ostream& out, const ResidualReport& report);

void write_selection_csv(std::ostream& out, const SelectionTable& table);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace hhmm
