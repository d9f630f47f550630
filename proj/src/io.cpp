#include "hhmm/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "hhmm/error.hpp"

namespace hhmm {

namespace {

[[noreturn]] void schema_error(const std::string& what) {
    throw Error(ErrorKind::data, "schema violation: " + what);
}

const Json& field(const Json& obj, const char* name, const std::string& where) {
    if (!obj.is_object()) schema_error(where + " must be an object");
    const auto it = obj.find(name);
    if (it == obj.end()) schema_error(where + "." + name + " is missing");
    return *it;
}

double number(const Json& v, const std::string& where) {
    if (!v.is_number()) schema_error(where + " must be a number");
    return v.get<double>();
}

int integer(const Json& v, const std::string& where) {
    if (!v.is_number_integer()) schema_error(where + " must be an integer");
    return v.get<int>();
}

Json vector_json(const Vector& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Vector vector_from(const Json& v, const std::string& where) {
    if (!v.is_array()) schema_error(where + " must be an array");
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = number(v[i], where + "[" + std::to_string(i) + "]");
    }
    return out;
}

Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Matrix square_from(const Json& v, int n, const std::string& where) {
    if (!v.is_array() || v.size() != static_cast<std::size_t>(n)) {
        schema_error(where + " must have " + std::to_string(n) + " rows");
    }
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
        const Vector row = vector_from(v[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
        if (row.size() != n) schema_error(where + " must be square");
        m.row(i) = row.transpose();
    }
    return m;
}

Json emissions_json(const std::vector<ScaledTDistribution>& emissions) {
    Json arr = Json::array();
    for (const auto& e : emissions) {
        arr.push_back(Json{{"location", e.location()}, {"scale", e.scale()}, {"dof", e.dof()}});
    }
    return arr;
}

std::vector<ScaledTDistribution> emissions_from(const Json& v, int n, const std::string& where) {
    if (!v.is_array() || v.size() != static_cast<std::size_t>(n)) {
        schema_error(where + " must hold " + std::to_string(n) + " emissions");
    }
    std::vector<ScaledTDistribution> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string w = where + "[" + std::to_string(k) + "]";
        out.emplace_back(number(field(v[k], "location", w), w + ".location"),
                         number(field(v[k], "scale", w), w + ".scale"),
                         number(field(v[k], "dof", w), w + ".dof"));
    }
    return out;
}

void check_format(const Json& doc, const char* expected) {
    if (!doc.is_object()) schema_error("document must be a JSON object");
    const auto it = doc.find("format");
    if (it != doc.end() && (!it->is_string() || it->get<std::string>() != expected)) {
        schema_error(std::string("format must be \"") + expected + "\"");
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return {buf, res.ptr};
}

Json model_to_json(const HierarchicalModel& model) {
    Json doc;
    doc["format"] = kModelFormat;
    doc["n_coarse"] = model.n_coarse();
    doc["n_fine"] = model.n_fine();
    doc["coarse_tpm"] = matrix_json(model.coarse_tpm().matrix());
    doc["coarse_emissions"] = emissions_json(model.coarse_emissions());
    if (model.coarse_initial()) doc["coarse_initial"] = vector_json(*model.coarse_initial());
    Json fine = Json::array();
    for (const auto& fm : model.fine_models()) {
        Json f;
        f["fine_tpm"] = matrix_json(fm.tpm.matrix());
        f["emissions"] = emissions_json(fm.emissions);
        if (fm.initial) f["initial"] = vector_json(*fm.initial);
        fine.push_back(std::move(f));
    }
    doc["fine_models"] = std::move(fine);
    return doc;
}

HierarchicalModel model_from_json(const Json& doc) {
    check_format(doc, kModelFormat);
    const int n = integer(field(doc, "n_coarse", "model"), "model.n_coarse");
    const int n_fine = integer(field(doc, "n_fine", "model"), "model.n_fine");
    if (n < 1 || n_fine < 1) schema_error("model state counts must be >= 1");
    try {
        TransitionMatrix tpm(square_from(field(doc, "coarse_tpm", "model"), n, "model.coarse_tpm"));
        auto emissions = emissions_from(field(doc, "coarse_emissions", "model"), n, "model.coarse_emissions");
        std::optional<Vector> initial;
        if (doc.contains("coarse_initial")) {
            initial = vector_from(doc["coarse_initial"], "model.coarse_initial");
        }
        const Json& fine_doc = field(doc, "fine_models", "model");
        if (!fine_doc.is_array() || fine_doc.size() != static_cast<std::size_t>(n)) {
            schema_error("model.fine_models must hold n_coarse entries");
        }
        std::vector<FineModel> fine;
        for (std::size_t i = 0; i < fine_doc.size(); ++i) {
            const std::string w = "model.fine_models[" + std::to_string(i) + "]";
            FineModel fm{TransitionMatrix(square_from(field(fine_doc[i], "fine_tpm", w), n_fine, w + ".fine_tpm")),
                         emissions_from(field(fine_doc[i], "emissions", w), n_fine, w + ".emissions"),
                         std::nullopt};
            if (fine_doc[i].contains("initial")) {
                fm.initial = vector_from(fine_doc[i]["initial"], w + ".initial");
            }
            fine.push_back(std::move(fm));
        }
        return HierarchicalModel(std::move(tpm), std::move(emissions), std::move(fine), std::move(initial));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::data) throw;
        throw Error(ErrorKind::data, std::string("invalid model: ") + e.what());
    }
}

Json panel_to_json(const ObservationPanel& panel) {
    Json doc;
    doc["format"] = kPanelFormat;
    doc["coarse"] = vector_json(panel.coarse());
    Json fine = Json::array();
    for (const auto& c : panel.fine()) fine.push_back(vector_json(c));
    doc["fine"] = std::move(fine);
    const auto& meta = panel.metadata();
    Json m;
    m["chunk_length"] = meta.chunk_length;
    m["dropped_returns"] = meta.dropped_returns;
    m["ragged"] = meta.ragged;
    Json ranges = Json::array();
    for (const auto& dates : meta.fine_dates) {
        ranges.push_back(Json{{"first", dates.front()}, {"last", dates.back()}});
    }
    m["date_ranges"] = std::move(ranges);
    if (!meta.fine_dates.empty()) m["fine_dates"] = meta.fine_dates;
    doc["metadata"] = std::move(m);
    return doc;
}

ObservationPanel panel_from_json(const Json& doc) {
    check_format(doc, kPanelFormat);
    const Vector coarse = vector_from(field(doc, "coarse", "panel"), "panel.coarse");
    const Json& fine_doc = field(doc, "fine", "panel");
    if (!fine_doc.is_array()) schema_error("panel.fine must be an array of arrays");
    std::vector<Vector> fine;
    for (std::size_t t = 0; t < fine_doc.size(); ++t) {
        fine.push_back(vector_from(fine_doc[t], "panel.fine[" + std::to_string(t) + "]"));
    }
    PanelMetadata meta;
    if (doc.contains("metadata")) {
        const Json& m = doc["metadata"];
        if (!m.is_object()) schema_error("panel.metadata must be an object");
        if (m.contains("chunk_length")) meta.chunk_length = integer(m["chunk_length"], "panel.metadata.chunk_length");
        if (m.contains("dropped_returns")) {
            meta.dropped_returns = integer(m["dropped_returns"], "panel.metadata.dropped_returns");
        }
        if (m.contains("ragged")) {
            if (!m["ragged"].is_boolean()) schema_error("panel.metadata.ragged must be a boolean");
            meta.ragged = m["ragged"].get<bool>();
        }
        if (m.contains("fine_dates")) {
            try {
                meta.fine_dates = m["fine_dates"].get<std::vector<std::vector<std::string>>>();
            } catch (const nlohmann::json::exception&) {
                schema_error("panel.metadata.fine_dates must be an array of string arrays");
            }
        }
    }
    return ObservationPanel(coarse, std::move(fine), std::move(meta));
}

Json run_diagnostics_to_json(const std::vector<RunDiagnostics>& runs) {
    Json arr = Json::array();
    for (const auto& r : runs) {
        Json j;
        j["start_index"] = r.start_index;
        j["seed"] = r.seed;
        j["log_likelihood"] = std::isfinite(r.log_likelihood) ? Json(r.log_likelihood) : Json(nullptr);
        j["iterations"] = r.iterations;
        j["evaluations"] = r.evaluations;
        j["converged"] = r.converged;
        j["gradient_norm"] = r.gradient_norm;
        j["status"] = r.status;
        arr.push_back(std::move(j));
    }
    return arr;
}

Json fit_result_to_json(const FitResult& result) {
    Json doc;
    doc["n_coarse"] = result.model.n_coarse();
    doc["n_fine"] = result.model.n_fine();
    doc["log_likelihood"] = result.log_likelihood;
    doc["aic"] = result.aic;
    doc["bic"] = result.bic;
    doc["n_parameters"] = result.n_parameters;
    doc["n_observations"] = result.n_observations;
    doc["converged_runs"] = result.converged_runs;
    doc["best_start"] = result.best_start;
    Json lls = Json::array();
    for (double ll : result.all_run_logliks) lls.push_back(std::isfinite(ll) ? Json(ll) : Json(nullptr));
    doc["all_run_logliks"] = std::move(lls);
    doc["runs"] = run_diagnostics_to_json(result.runs);
    doc["model"] = model_to_json(result.model);
    return doc;
}

namespace {

Json summary_json(const ResidualSummary& s) {
    Json j;
    j["ks_statistic"] = s.ks_statistic;
    j["histogram"] = Json{{"lower", s.histogram.lower},
                          {"upper", s.histogram.upper},
                          {"counts", s.histogram.counts},
                          {"below", s.histogram.below},
                          {"above", s.histogram.above}};
    j["autocorrelation"] = s.autocorrelation;
    return j;
}

}  // namespace

Json residual_report_to_json(const ResidualReport& report) {
    Json doc;
    doc["coarse_residuals"] = vector_json(report.coarse_residuals);
    Json fine = Json::array();
    for (const auto& z : report.fine_residuals) fine.push_back(vector_json(z));
    doc["fine_residuals"] = std::move(fine);
    doc["ks_statistic_coarse"] = report.coarse.ks_statistic;
    doc["ks_statistic_fine"] = report.fine.ks_statistic;
    doc["ks_critical_01_coarse"] = ks_critical_value_01(static_cast<std::size_t>(report.coarse_residuals.size()));
    std::size_t n_fine = 0;
    for (const auto& z : report.fine_residuals) n_fine += static_cast<std::size_t>(z.size());
    doc["ks_critical_01_fine"] = ks_critical_value_01(n_fine);
    doc["coarse"] = summary_json(report.coarse);
    doc["fine"] = summary_json(report.fine);
    return doc;
}

void write_decoded_csv(std::ostream& out, const ObservationPanel& panel, const DecodedStates& states) {
    const bool dates = panel.has_dates();
    out << (dates ? "date," : "") << "coarse_state,fine_state,observation\n";
    for (int t = 0; t < panel.n_chunks(); ++t) {
        const auto tt = static_cast<std::size_t>(t);
        const auto& chunk = panel.chunk(t);
        for (Eigen::Index k = 0; k < chunk.size(); ++k) {
            if (dates) out << panel.metadata().fine_dates[tt][static_cast<std::size_t>(k)] << ',';
            out << states.coarse[tt] + 1 << ',' << states.fine[tt][static_cast<std::size_t>(k)] + 1
                << ',' << format_double(chunk[k]) << '\n';
        }
    }
}

DecodedStates read_decoded_csv(std::istream& in, const ObservationPanel& panel) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::data, "decoded file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line, ',');
    const bool dates = !header.empty() && header.front() == "date";
    const std::size_t offset = dates ? 1 : 0;
    if (header.size() != 3 + offset || header[offset] != "coarse_state" ||
        header[offset + 1] != "fine_state" || header[offset + 2] != "observation") {
        throw Error(ErrorKind::data, "decoded header must be [date,]coarse_state,fine_state,observation");
    }
    DecodedStates out;
    std::size_t line_no = 1;
    for (int t = 0; t < panel.n_chunks(); ++t) {
        const auto& chunk = panel.chunk(t);
        std::vector<int> fine;
        int coarse_state = -1;
        for (Eigen::Index k = 0; k < chunk.size(); ++k) {
            ++line_no;
            if (!std::getline(in, line)) {
                throw Error(ErrorKind::data, "decoded file has fewer rows than the panel");
            }
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto cols = split(line, ',');
            if (cols.size() != 3 + offset) {
                throw Error(ErrorKind::data, "decoded line " + std::to_string(line_no) + ": wrong column count");
            }
            int c = 0, f = 0;
            double x = 0.0;
            try {
                c = std::stoi(cols[offset]);
                f = std::stoi(cols[offset + 1]);
                x = std::stod(cols[offset + 2]);
            } catch (const std::exception&) {
                throw Error(ErrorKind::data, "decoded line " + std::to_string(line_no) + ": bad number");
            }
            if (k == 0) coarse_state = c - 1;
            if (c - 1 != coarse_state) {
                throw Error(ErrorKind::data, "decoded line " + std::to_string(line_no) +
                                                 ": coarse state changes inside a chunk");
            }
            if (std::fabs(x - chunk[k]) > 1e-9 * std::max(1.0, std::fabs(chunk[k]))) {
                throw Error(ErrorKind::data, "decoded line " + std::to_string(line_no) +
                                                 ": observation does not match the panel");
            }
            fine.push_back(f - 1);
        }
        out.coarse.push_back(coarse_state);
        out.fine.push_back(std::move(fine));
    }
    while (std::getline(in, line)) {
        if (!line.empty() && line != "\r") throw Error(ErrorKind::data, "decoded file has extra rows");
    }
    return out;
}

void write_qq_csv(std::ostream& out, const ResidualReport& report) {
    out << "scale,theoretical,empirical\n";
    for (const auto& p : report.coarse.qq) {
        out << "coarse," << format_double(p.theoretical) << ',' << format_double(p.empirical) << '\n';
    }
    for (const auto& p : report.fine.qq) {
        out << "fine," << format_double(p.theoretical) << ',' << format_double(p.empirical) << '\n';
    }
}

void write_selection_csv(std::ostream& out, const SelectionTable& table) {
    out << "n_coarse,n_fine,n_parameters,log_likelihood,aic,bic,aic_best,bic_best,converged_runs,status\n";
    for (const auto& e : table.entries) {
        out << e.n_coarse << ',' << e.n_fine << ',';
        if (e.result) {
            const auto& r = *e.result;
            out << r.n_parameters << ',' << format_double(r.log_likelihood) << ','
                << format_double(r.aic) << ',' << format_double(r.bic) << ',' << (e.aic_best ? 1 : 0)
                << ',' << (e.bic_best ? 1 : 0) << ',' << r.converged_runs << ",ok\n";
        } else {
            std::string msg = e.error;
            for (char& ch : msg) {
                if (ch == ',' || ch == '\n') ch = ';';
            }
            out << parameter_count(e.n_coarse, e.n_fine) << ",,,,0,0,0,failed: " << msg << '\n';
        }
    }
}

}  // namespace hhmm
