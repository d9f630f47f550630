#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "hhmm/error.hpp"
#include "hhmm/ingest.hpp"
#include "hhmm/random.hpp"

using namespace hhmm;

namespace {

ErrorKind kind_of(const std::string& csv) {
    std::istringstream in(csv);
    try {
        read_prices_csv(in);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error for: " << csv);
    return ErrorKind::io;
}

std::string message_of(const std::string& csv) {
    std::istringstream in(csv);
    try {
        read_prices_csv(in);
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

DatedReturns synthetic_returns(int n) {
    DatedReturns r;
    for (int i = 0; i < n; ++i) r.values.push_back(0.001 * (i % 7) - 0.002);
    return r;
}

}  // namespace

TEST_CASE("log returns") {
    const PriceSeries flat{{"2020-01-01", "2020-01-02"}, {100.0, 100.0}};
    CHECK(log_returns(flat).values[0] == 0.0);
    const PriceSeries up{{"2020-01-01", "2020-01-02"}, {100.0, 105.0}};
    const auto r = log_returns(up);
    CHECK(std::fabs(r.values[0] - 0.0487902) < 1e-7);
    CHECK(r.dates == std::vector<std::string>{"2020-01-02"});

    const PriceSeries walk{{"2020-01-01", "2020-01-02", "2020-01-03", "2020-01-06"}, {100.0, 103.5, 97.25, 101.0}};
    const auto w = log_returns(walk);
    const double total = std::accumulate(w.values.begin(), w.values.end(), 0.0);
    CHECK(std::fabs(total - std::log(101.0 / 100.0)) < 1e-12);

    const PriceSeries one{{"2020-01-01"}, {100.0}};
    try {
        log_returns(one);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::insufficient_data);
    }
    const PriceSeries bad{{"2020-01-01", "2020-01-02"}, {100.0, 0.0}};
    try {
        log_returns(bad);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK(std::string(e.what()).find("2020-01-02") != std::string::npos);
    }
}

TEST_CASE("reading price files") {
    SUBCASE("header variations and extra columns") {
        std::istringstream in("\xEF\xBB\xBFOpen,Date,\"Close\",Volume\r\n1,2020-01-02,100.5,7\r\n2,2020-01-03,\"101.25\",8\r\n\n");
        const auto p = read_prices_csv(in);
        CHECK(p.dates == std::vector<std::string>{"2020-01-02", "2020-01-03"});
        CHECK(p.closes == std::vector<double>{100.5, 101.25});
    }
    SUBCASE("errors name the line") {
        CHECK(kind_of("date,close\n2020-01-02,abc\n") == ErrorKind::data);
        CHECK(message_of("date,close\n2020-01-02,1\n2020-13-01,2\n").find("line 3") != std::string::npos);
        CHECK(kind_of("date,close\n2020-02-30,1\n") == ErrorKind::data);
        CHECK(kind_of("date,close\n2020-01-02,-5\n") == ErrorKind::data);
        CHECK(kind_of("date,close\n2020-01-03,1\n2020-01-02,2\n") == ErrorKind::data);
        CHECK(kind_of("date,close\n2020-01-03,1\n2020-01-03,2\n") == ErrorKind::data);
        CHECK(kind_of("day,price\n2020-01-03,1\n") == ErrorKind::data);
        CHECK(kind_of("") == ErrorKind::data);
        CHECK(kind_of("date,close\n2020-01-03\n") == ErrorKind::data);
    }
}

TEST_CASE("ISO dates") {
    CHECK(is_iso_date("2000-02-29"));
    CHECK_FALSE(is_iso_date("1900-02-29"));
    CHECK_FALSE(is_iso_date("2020-1-02"));
    CHECK_FALSE(is_iso_date("2020/01/02"));
    CHECK_FALSE(is_iso_date("2020-00-10"));
}

TEST_CASE("panel construction") {
    SUBCASE("60 returns make two chunks of their means") {
        const auto r = synthetic_returns(60);
        const auto panel = build_panel(r, 30);
        REQUIRE(panel.n_chunks() == 2);
        for (int t = 0; t < 2; ++t) {
            double m = 0.0;
            for (int k = 0; k < 30; ++k) m += r.values[static_cast<std::size_t>(30 * t + k)];
            CHECK(std::fabs(panel.coarse()[t] - m / 30.0) < 1e-12);
        }
        CHECK(panel.metadata().dropped_returns == 0);
    }
    SUBCASE("identical returns") {
        DatedReturns r;
        r.values.assign(30, 0.0123);
        CHECK(build_panel(r, 30).coarse()[0] == doctest::Approx(0.0123).epsilon(1e-15));
    }
    SUBCASE("65 returns drop the trailing five by default") {
        const auto panel = build_panel(synthetic_returns(65), 30);
        CHECK(panel.n_chunks() == 2);
        CHECK(panel.metadata().dropped_returns == 5);
        CHECK_FALSE(panel.metadata().ragged);
        CHECK(panel.n_fine_observations() == 60);
    }
    SUBCASE("keep policy makes a ragged final chunk") {
        const auto panel = build_panel(synthetic_returns(65), 30, RaggedPolicy::keep);
        CHECK(panel.n_chunks() == 3);
        CHECK(panel.chunk(2).size() == 5);
        CHECK(panel.metadata().ragged);
        CHECK(panel.metadata().dropped_returns == 0);
        CHECK(panel.coarse()[2] == doctest::Approx(panel.chunk(2).mean()).epsilon(1e-14));
    }
    SUBCASE("chunk count is floor(n / T*)") {
        for (int n : {20, 39, 40, 41, 99}) {
            CHECK(build_panel(synthetic_returns(n), 20).n_chunks() == n / 20);
        }
    }
    SUBCASE("dates follow the chunks") {
        PriceSeries prices;
        for (int d = 1; d <= 9; ++d) {
            prices.dates.push_back("2021-03-0" + std::to_string(d));
            prices.closes.push_back(100.0 + d);
        }
        const auto panel = build_panel(log_returns(prices), 4);
        REQUIRE(panel.has_dates());
        CHECK(panel.metadata().fine_dates[0].front() == "2021-03-02");
        CHECK(panel.metadata().fine_dates[1].back() == "2021-03-09");
    }
    SUBCASE("too few returns") {
        try {
            build_panel(synthetic_returns(29), 30);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::insufficient_data);
        }
        CHECK_THROWS_AS(build_panel(synthetic_returns(29), 0), Error);
    }
}

TEST_CASE("property: every chunk mean equals its coarse value") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        DatedReturns r;
        const int n = 10 + static_cast<int>(rng.next_u64() % 200);
        for (int i = 0; i < n; ++i) r.values.push_back(0.02 * rng.normal());
        const int len = 1 + static_cast<int>(rng.next_u64() % 10);
        const auto panel = build_panel(r, len, trial % 2 ? RaggedPolicy::keep : RaggedPolicy::drop);
        for (int t = 0; t < panel.n_chunks(); ++t) {
            REQUIRE(std::fabs(panel.coarse()[t] - panel.chunk(t).mean()) <= 1e-12);
        }
    }
}
