#include <doctest.h>

#include <cmath>
#include <vector>

#include "hhmm/error.hpp"
#include "hhmm/forward.hpp"
#include "hhmm/likelihood.hpp"
#include "oracles.hpp"

using namespace hhmm;

namespace {

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

TEST_CASE("single-state model reduces to independent densities") {
    const FineModel fine{TransitionMatrix::identity(1), {ScaledTDistribution(0.1, 0.5, 6.0)}, std::nullopt};
    const HierarchicalModel m(TransitionMatrix::identity(1), {ScaledTDistribution(-0.2, 2.0, 3.0)}, {fine});
    Rng rng(1);
    const auto panel = oracle::random_panel(5, 7, rng, 3);
    double expected = 0.0;
    for (int t = 0; t < panel.n_chunks(); ++t) {
        expected += std::log(oracle::t_density(m.coarse_emissions()[0], panel.coarse()[t]));
        for (double x : panel.chunk_span(t)) expected += std::log(oracle::t_density(fine.emissions[0], x));
    }
    CHECK(hhmm_log_likelihood(m, panel) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("property: fine likelihood equals the path sum") {
    Rng rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + trial % 3;
        const auto m = oracle::random_model(1, n, rng);
        Vector chunk(1 + trial % 6);
        for (int k = 0; k < chunk.size(); ++k) chunk[k] = rng.uniform(-3.0, 3.0);
        const double expected = std::log(static_cast<double>(oracle::fine_likelihood(m.fine_model(0), chunk)));
        REQUIRE(fine_log_likelihood(m.fine_model(0), as_span(chunk)) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("property: two-level likelihood equals brute-force enumeration") {
    Rng rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + trial % 3;
        const int nf = 1 + (trial / 3) % 3;
        const auto m = oracle::random_model(n, nf, rng);
        // Every fourth panel ends with a shorter chunk.
        const auto panel = oracle::random_panel(1 + trial % 4, 1 + trial % 4, rng, trial % 4 == 3 ? 2 : 0);
        const double expected = std::log(static_cast<double>(oracle::hhmm_likelihood(m, panel)));
        REQUIRE(hhmm_log_likelihood(m, panel) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("ragged final chunk") {
    Rng rng(5);
    const auto m = oracle::random_model(2, 2, rng);
    const auto panel = oracle::random_panel(3, 4, rng, 1);
    CHECK(panel.chunk(2).size() == 1);
    const double expected = std::log(static_cast<double>(oracle::hhmm_likelihood(m, panel)));
    CHECK(hhmm_log_likelihood(m, panel) == doctest::Approx(expected).epsilon(1e-11));
}

TEST_CASE("free initial distributions enter the likelihood") {
    Rng rng(8);
    const auto base = oracle::random_model(2, 2, rng);
    Vector init(2);
    init << 0.9, 0.1;
    auto fine = base.fine_models();
    Vector fine_init(2);
    fine_init << 0.25, 0.75;
    fine[1].initial = fine_init;
    const HierarchicalModel m(base.coarse_tpm(), base.coarse_emissions(), fine, init);
    const auto panel = oracle::random_panel(3, 3, rng);
    const double expected = std::log(static_cast<double>(oracle::hhmm_likelihood(m, panel)));
    CHECK(hhmm_log_likelihood(m, panel) == doctest::Approx(expected).epsilon(1e-11));
    CHECK(std::fabs(hhmm_log_likelihood(m, panel) - hhmm_log_likelihood(base, panel)) > 1e-6);
}

TEST_CASE("long series stay finite") {
    Rng rng(3);
    const auto m = oracle::random_model(3, 2, rng);
    const auto panel = oracle::random_panel(400, 60, rng);
    const double ll = hhmm_log_likelihood(m, panel);
    CHECK(std::isfinite(ll));
    CHECK(ll < -1000.0);
}

TEST_CASE("forward tables agree with the likelihood") {
    Rng rng(4);
    const auto m = oracle::random_model(2, 3, rng);
    const auto panel = oracle::random_panel(6, 5, rng, 2);
    const auto tables = log_forward_tables(m, panel, true);
    CHECK(tables.coarse.rows() == 6);
    const Eigen::RowVectorXd last = tables.coarse.row(5);
    CHECK(log_sum_exp(last) == doctest::Approx(hhmm_log_likelihood(m, panel)).epsilon(1e-12));
    REQUIRE(tables.fine.size() == 6);
    const Matrix chunk_ll = chunk_log_likelihood_matrix(m, panel);
    for (int t = 0; t < 6; ++t) {
        for (int i = 0; i < 2; ++i) {
            const Matrix& f = tables.fine[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
            CHECK(f.rows() == panel.chunk(t).size());
            const Eigen::RowVectorXd fl = f.row(f.rows() - 1);
            CHECK(log_sum_exp(fl) == doctest::Approx(chunk_ll(t, i)).epsilon(1e-12));
        }
    }
    CHECK(log_forward_tables(m, panel, false).fine.empty());
}

TEST_CASE("coarse likelihood from precomputed chunk terms") {
    Rng rng(6);
    const auto m = oracle::random_model(3, 2, rng);
    const auto panel = oracle::random_panel(5, 4, rng);
    const double direct = coarse_log_likelihood(m.coarse_tpm(), m.initial_distribution(), m.coarse_emissions(),
                                                panel.coarse(), chunk_log_likelihood_matrix(m, panel));
    CHECK(direct == doctest::Approx(hhmm_log_likelihood(m, panel)).epsilon(1e-13));
    const Matrix terms = coarse_log_observation_terms(m, panel);
    CHECK(terms(0, 0) == doctest::Approx(log_density(m.coarse_emissions()[0], panel.coarse()[0]) +
                                         fine_log_likelihood(m.fine_model(0), panel.chunk_span(0))));
}

TEST_CASE("property: likelihood is invariant under state relabelling") {
    Rng rng(30);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = oracle::random_model(3, 2, rng);
        const auto panel = oracle::random_panel(6, 5, rng);
        const std::vector<int> order{1, 2, 0};
        const std::vector<int> swap{1, 0};
        const auto p = permute_fine_states(permute_coarse_states(m, order), 2, swap);
        REQUIRE(hhmm_log_likelihood(p, panel) == doctest::Approx(hhmm_log_likelihood(m, panel)).epsilon(1e-12));
    }
}

TEST_CASE("negative log-likelihood on the unconstrained vector") {
    Rng rng(12);
    const auto m = oracle::random_model(2, 2, rng);
    const auto panel = oracle::random_panel(4, 5, rng);
    const Vector v = pack(m);
    CHECK(negative_log_likelihood(as_span(v), panel, 2, 2) ==
          doctest::Approx(-hhmm_log_likelihood(m, panel)).epsilon(1e-12));

    SUBCASE("overflowing parameters return the penalty") {
        Vector bad = v;
        bad[3] = 1e6;  // log scale of coarse state 1
        CHECK(negative_log_likelihood(as_span(bad), panel, 2, 2) == kObjectivePenalty);
        bad = v;
        bad[2] = NAN;
        CHECK(negative_log_likelihood(as_span(bad), panel, 2, 2) == kObjectivePenalty);
    }
    SUBCASE("wrong length is a layout error, not a penalty") {
        const Vector shorter = v.head(v.size() - 1);
        CHECK_THROWS_AS(negative_log_likelihood(as_span(shorter), panel, 2, 2), Error);
    }
}

TEST_CASE("tiny scales with nearby data stay finite") {
    const FineModel fine{TransitionMatrix::identity(1), {ScaledTDistribution(0.1, 1e-6, 5.0)}, std::nullopt};
    const HierarchicalModel m(TransitionMatrix::identity(1), {ScaledTDistribution(0.1, 1e-6, 5.0)}, {fine});
    Rng rng(2);
    Vector coarse(100);
    std::vector<Vector> chunks;
    for (int t = 0; t < 100; ++t) {
        coarse[t] = 0.1 + 1e-6 * rng.normal();
        Vector c(99);
        for (int k = 0; k < 99; ++k) c[k] = 0.1 + 1e-6 * rng.normal();
        chunks.push_back(c);
    }
    const ObservationPanel panel(coarse, chunks);
    CHECK(std::isfinite(hhmm_log_likelihood(m, panel)));
}

TEST_CASE("log-sum-exp") {
    Eigen::VectorXd v(3);
    v << -1000.0, -1000.0, -INFINITY;
    CHECK(log_sum_exp(v) == doctest::Approx(-1000.0 + std::log(2.0)));
    v << -INFINITY, -INFINITY, -INFINITY;
    CHECK(log_sum_exp(v) == -INFINITY);
    v << 800.0, 0.0, 1.0;
    CHECK(log_sum_exp(v) == doctest::Approx(800.0));
}

TEST_CASE("fine likelihood shifts with a constant density scale") {
    // Scaling every emission by s changes each density by -log(s) at the
    // rescaled point; shifting every log-density by c adds T* c.
    Rng rng(40);
    const auto m = oracle::random_model(1, 2, rng);
    Vector chunk(3);
    chunk << 0.3, -1.2, 2.0;
    const auto& fm = m.fine_model(0);
    const double base = fine_log_likelihood(fm, as_span(chunk));
    std::vector<ScaledTDistribution> scaled;
    for (const auto& e : fm.emissions) scaled.emplace_back(2.0 * e.location(), 2.0 * e.scale(), e.dof());
    const FineModel stretched{fm.tpm, scaled, std::nullopt};
    const Vector stretched_chunk = 2.0 * chunk;
    CHECK(fine_log_likelihood(stretched, as_span(stretched_chunk)) ==
          doctest::Approx(base - 3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("directional derivative by two step sizes") {
    Rng rng(41);
    const auto m = oracle::random_model(2, 2, rng);
    const auto panel = oracle::random_panel(5, 6, rng);
    const Vector v = pack(m);
    auto diff = [&](double h) {
        Vector up = v, down = v;
        up[0] += h;
        down[0] -= h;
        return (negative_log_likelihood(as_span(up), panel, 2, 2) -
                negative_log_likelihood(as_span(down), panel, 2, 2)) / (2.0 * h);
    };
    const double d1 = diff(1e-4);
    const double d2 = diff(1e-6);
    CHECK(std::fabs(d1 - d2) <= 1e-4 * std::max(1.0, std::fabs(d1)));
}
