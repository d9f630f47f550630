#include "hhmm/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include "hhmm/error.hpp"

namespace hhmm {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            field.push_back(c);
        } else if (c == ',' && !quoted) {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(trim(field));
    return fields;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool parse_int(std::string_view s, int& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::istringstream is(s);
    is.imbue(std::locale::classic());
    is >> out;
    return !is.fail() && is.eof();
}

std::string line_label(std::size_t line) { return "line " + std::to_string(line); }

}  // namespace

bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0, m = 0, d = 0;
    const std::string_view v(s);
    if (!parse_int(v.substr(0, 4), y) || !parse_int(v.substr(5, 2), m) ||
        !parse_int(v.substr(8, 2), d)) {
        return false;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    return ymd.ok();
}

PriceSeries read_prices_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw Error(ErrorKind::data, "price file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

    const auto header = split_csv_line(line);
    int date_col = -1, close_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = lower(header[i]);
        if (name == "date" && date_col < 0) date_col = static_cast<int>(i);
        if (name == "close" && close_col < 0) close_col = static_cast<int>(i);
    }
    if (date_col < 0 || close_col < 0) {
        throw Error(ErrorKind::data, "price header must contain 'date' and 'close' columns");
    }

    PriceSeries out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        const auto needed = static_cast<std::size_t>(std::max(date_col, close_col));
        if (fields.size() <= needed) {
            throw Error(ErrorKind::data, line_label(line_no) + ": missing columns");
        }
        const auto& date = fields[static_cast<std::size_t>(date_col)];
        if (!is_iso_date(date)) {
            throw Error(ErrorKind::data, line_label(line_no) + ": invalid date '" + date + "'");
        }
        double close = 0.0;
        if (!parse_double(fields[static_cast<std::size_t>(close_col)], close) ||
            !std::isfinite(close)) {
            throw Error(ErrorKind::data, line_label(line_no) + ": invalid close '" +
                                             fields[static_cast<std::size_t>(close_col)] + "'");
        }
        if (!(close > 0.0)) {
            throw Error(ErrorKind::data, line_label(line_no) + " (" + date +
                                             "): close must be positive");
        }
        if (!out.dates.empty() && !(out.dates.back() < date)) {
            throw Error(ErrorKind::data, line_label(line_no) + ": date " + date +
                                             " is not after " + out.dates.back());
        }
        out.dates.push_back(date);
        out.closes.push_back(close);
    }
    return out;
}

DatedReturns log_returns(const PriceSeries& prices) {
    if (prices.closes.size() != prices.dates.size()) {
        throw Error(ErrorKind::data, "price dates and closes differ in length");
    }
    if (prices.closes.size() < 2) {
        throw Error(ErrorKind::insufficient_data, "need at least two prices for a log-return");
    }
    for (std::size_t i = 0; i < prices.closes.size(); ++i) {
        if (!(prices.closes[i] > 0.0) || !std::isfinite(prices.closes[i])) {
            throw Error(ErrorKind::data, "row " + std::to_string(i + 1) + " (" + prices.dates[i] +
                                             "): price must be positive and finite");
        }
    }
    DatedReturns out;
    out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
    out.values.reserve(prices.closes.size() - 1);
    for (std::size_t i = 1; i < prices.closes.size(); ++i) {
        out.values.push_back(std::log(prices.closes[i] / prices.closes[i - 1]));
    }
    return out;
}

ObservationPanel build_panel(const DatedReturns& returns, int chunk_length, RaggedPolicy policy) {
    if (chunk_length < 1) throw Error(ErrorKind::invalid_parameter, "chunk length must be >= 1");
    const bool has_dates = !returns.dates.empty();
    if (has_dates && returns.dates.size() != returns.values.size()) {
        throw Error(ErrorKind::data, "return dates and values differ in length");
    }
    const auto n = returns.values.size();
    const auto len = static_cast<std::size_t>(chunk_length);
    if (n < len) {
        throw Error(ErrorKind::insufficient_data,
                    std::to_string(n) + " returns is fewer than one chunk of " +
                        std::to_string(chunk_length));
    }
    const std::size_t full = n / len;
    const std::size_t remainder = n % len;
    const bool keep_tail = policy == RaggedPolicy::keep && remainder > 0;
    const std::size_t n_chunks = full + (keep_tail ? 1 : 0);

    Eigen::VectorXd coarse(static_cast<Eigen::Index>(n_chunks));
    std::vector<Eigen::VectorXd> fine;
    PanelMetadata meta;
    meta.chunk_length = chunk_length;
    meta.ragged = keep_tail;
    meta.dropped_returns = keep_tail ? 0 : static_cast<int>(remainder);
    for (std::size_t t = 0; t < n_chunks; ++t) {
        const std::size_t begin = t * len;
        const std::size_t size = std::min(len, n - begin);
        fine.emplace_back(Eigen::Map<const Eigen::VectorXd>(returns.values.data() + begin,
                                                            static_cast<Eigen::Index>(size)));
        coarse[static_cast<Eigen::Index>(t)] = fine.back().mean();
        if (has_dates) {
            meta.fine_dates.emplace_back(returns.dates.begin() + static_cast<std::ptrdiff_t>(begin),
                                         returns.dates.begin() +
                                             static_cast<std::ptrdiff_t>(begin + size));
        }
    }
    return ObservationPanel(std::move(coarse), std::move(fine), std::move(meta));
}

}  // namespace hhmm
