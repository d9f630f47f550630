#include <doctest.h>

#include <sstream>

#include "hhmm/error.hpp"
#include "hhmm/ingest.hpp"
#include "hhmm/io.hpp"
#include "hhmm/simulation.hpp"
#include "oracles.hpp"

using namespace hhmm;

namespace {

ErrorKind model_error(const Json& doc) {
    try {
        model_from_json(doc);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected a schema error");
    return ErrorKind::io;
}

}  // namespace

TEST_CASE("model documents round trip exactly") {
    Rng rng(10);
    auto m = oracle::random_model(3, 2, rng);
    const Json doc = model_to_json(m);
    CHECK(doc["format"] == kModelFormat);
    const auto back = model_from_json(Json::parse(doc.dump()));
    CHECK(back.coarse_tpm() == m.coarse_tpm());
    CHECK(back.coarse_emissions() == m.coarse_emissions());
    for (int i = 0; i < 3; ++i) {
        CHECK(back.fine_model(i).tpm == m.fine_model(i).tpm);
        CHECK(back.fine_model(i).emissions == m.fine_model(i).emissions);
    }
    CHECK(model_to_json(back).dump() == doc.dump());

    Vector init(3);
    init << 0.2, 0.3, 0.5;
    const HierarchicalModel with_init(m.coarse_tpm(), m.coarse_emissions(), m.fine_models(), init);
    const auto back2 = model_from_json(model_to_json(with_init));
    REQUIRE(back2.coarse_initial());
    CHECK(*back2.coarse_initial() == init);
}

TEST_CASE("model schema violations are data errors") {
    Rng rng(1);
    const Json good = model_to_json(oracle::random_model(2, 2, rng));
    Json doc = good;
    doc["format"] = "something-else";
    CHECK(model_error(doc) == ErrorKind::data);
    doc = good;
    doc.erase("coarse_tpm");
    CHECK(model_error(doc) == ErrorKind::data);
    doc = good;
    doc["coarse_tpm"][0][0] = 0.99;
    CHECK(model_error(doc) == ErrorKind::data);
    doc = good;
    doc["coarse_emissions"][1]["scale"] = -1.0;
    CHECK(model_error(doc) == ErrorKind::data);
    doc = good;
    doc["n_fine"] = 3;
    CHECK(model_error(doc) == ErrorKind::data);
    doc = good;
    doc["fine_models"].erase(1);
    CHECK(model_error(doc) == ErrorKind::data);
    doc = good;
    doc["coarse_emissions"][0]["dof"] = "five";
    CHECK(model_error(doc) == ErrorKind::data);
}

TEST_CASE("panel documents round trip exactly") {
    PriceSeries prices;
    double p = 100.0;
    Rng rng(2);
    for (int d = 1; d <= 28; ++d) {
        prices.dates.push_back(std::string("2022-02-") + (d < 10 ? "0" : "") + std::to_string(d));
        p *= std::exp(0.01 * rng.normal());
        prices.closes.push_back(p);
    }
    const auto panel = build_panel(log_returns(prices), 10, RaggedPolicy::keep);
    const Json doc = panel_to_json(panel);
    CHECK(doc["metadata"]["date_ranges"][0]["first"] == "2022-02-02");
    CHECK(doc["metadata"]["date_ranges"][2]["last"] == "2022-02-28");
    const auto back = panel_from_json(Json::parse(doc.dump()));
    CHECK(back.coarse() == panel.coarse());
    CHECK(back.fine() == panel.fine());
    CHECK(back.metadata().fine_dates == panel.metadata().fine_dates);
    CHECK(back.metadata().ragged);
    CHECK(back.metadata().chunk_length == 10);
    CHECK(panel_to_json(back).dump() == doc.dump());

    Json bad = doc;
    bad["fine"][1][0] = "x";
    CHECK_THROWS_AS(panel_from_json(bad), Error);
    bad = doc;
    bad["fine"].erase(0);
    CHECK_THROWS_AS(panel_from_json(bad), Error);
}

TEST_CASE("decoded CSV round trip") {
    Rng rng(3);
    const auto m = oracle::random_model(2, 2, rng);
    const auto sim = simulate({m, 6, 4, 1});
    std::ostringstream out;
    write_decoded_csv(out, sim.panel, sim.truth);
    const std::string text = out.str();
    CHECK(text.rfind("coarse_state,fine_state,observation\n", 0) == 0);
    std::istringstream in(text);
    CHECK(read_decoded_csv(in, sim.panel) == sim.truth);

    SUBCASE("1-based states") {
        std::istringstream lines(text);
        std::string header, first;
        std::getline(lines, header);
        std::getline(lines, first);
        const int state = first[0] - '0';
        CHECK(state == sim.truth.coarse[0] + 1);
    }
    SUBCASE("truncated file") {
        std::istringstream cut(text.substr(0, text.size() / 2));
        CHECK_THROWS_AS(read_decoded_csv(cut, sim.panel), Error);
    }
    SUBCASE("wrong observation") {
        const auto other = simulate({m, 6, 4, 2});
        std::istringstream again(text);
        CHECK_THROWS_AS(read_decoded_csv(again, other.panel), Error);
    }
}

TEST_CASE("format_double is shortest round trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1e-300) == "1e-300");
    const double x = 0.048790164169432;
    CHECK(std::stod(format_double(x)) == x);
}
