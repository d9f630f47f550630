#include <doctest.h>

#include <cmath>
#include <vector>

#include "hhmm/error.hpp"
#include "hhmm/simulation.hpp"
#include "oracles.hpp"

using namespace hhmm;

namespace {

HierarchicalModel two_by_two() {
    const FineModel f1{TransitionMatrix(Matrix{{0.8, 0.2}, {0.4, 0.6}}),
                       {ScaledTDistribution(-1.0, 0.5, 5.0), ScaledTDistribution(1.0, 0.5, 5.0)},
                       std::nullopt};
    const FineModel f2{TransitionMatrix(Matrix{{0.5, 0.5}, {0.1, 0.9}}),
                       {ScaledTDistribution(0.0, 1.0, 5.0), ScaledTDistribution(2.0, 1.0, 5.0)},
                       std::nullopt};
    return HierarchicalModel(TransitionMatrix(Matrix{{0.95, 0.05}, {0.1, 0.9}}),
                             {ScaledTDistribution(-0.5, 1.0, 4.0), ScaledTDistribution(0.5, 1.0, 4.0)},
                             {f1, f2});
}

}  // namespace

TEST_CASE("shapes and determinism") {
    const auto m = two_by_two();
    const auto a = simulate({m, 50, 7, 11});
    CHECK(a.panel.n_chunks() == 50);
    CHECK(a.panel.chunk(49).size() == 7);
    CHECK(a.truth.coarse.size() == 50);
    check_consistent(a.truth, a.panel, 2, 2);
    const auto b = simulate({m, 50, 7, 11});
    CHECK(a.panel.coarse() == b.panel.coarse());
    CHECK(a.truth == b.truth);
    const auto c = simulate({m, 50, 7, 12});
    CHECK(a.panel.coarse() != c.panel.coarse());
}

TEST_CASE("invalid lengths") {
    const auto m = two_by_two();
    try {
        simulate({m, 0, 5, 1});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_parameter);
    }
    CHECK_THROWS_AS(simulate({m, 5, 0, 1}), Error);
}

TEST_CASE("chunk-average coarse mode") {
    const auto sim = simulate({two_by_two(), 20, 9, 3, CoarseMode::chunk_average});
    for (int t = 0; t < 20; ++t) CHECK(sim.panel.coarse()[t] == doctest::Approx(sim.panel.chunk(t).mean()));
}

TEST_CASE("long-run frequencies match the chain") {
    const auto m = two_by_two();
    const auto sim = simulate({m, 100000, 4, 2024});
    const auto& s = sim.truth.coarse;
    const Vector pi = stationary_distribution(m.coarse_tpm()).probabilities();
    double occ = 0.0;
    Matrix counts = Matrix::Zero(2, 2);
    for (std::size_t t = 0; t < s.size(); ++t) {
        occ += s[t] == 0;
        if (t > 0) counts(s[t - 1], s[t]) += 1.0;
    }
    CHECK(std::fabs(occ / 1e5 - pi[0]) < 0.02);
    for (int i = 0; i < 2; ++i) {
        const Eigen::RowVectorXd freq = counts.row(i) / counts.row(i).sum();
        CHECK((freq - m.coarse_tpm().matrix().row(i)).cwiseAbs().maxCoeff() < 0.01);
    }

    // Fine chains: first state of each chunk follows delta*, later ones Gamma*.
    Matrix first = Matrix::Zero(2, 2);
    std::vector<Matrix> fine_counts(2, Matrix::Zero(2, 2));
    for (std::size_t t = 0; t < s.size(); ++t) {
        const auto& f = sim.truth.fine[t];
        first(s[t], f[0]) += 1.0;
        for (std::size_t k = 1; k < f.size(); ++k) fine_counts[static_cast<std::size_t>(s[t])](f[k - 1], f[k]) += 1.0;
    }
    for (int i = 0; i < 2; ++i) {
        const Vector delta = m.fine_model(i).initial_distribution();
        CHECK(std::fabs(first(i, 0) / first.row(i).sum() - delta[0]) < 0.01);
        for (int j = 0; j < 2; ++j) {
            const Eigen::RowVectorXd freq = fine_counts[static_cast<std::size_t>(i)].row(j) /
                                            fine_counts[static_cast<std::size_t>(i)].row(j).sum();
            CHECK((freq - m.fine_model(i).tpm.matrix().row(j)).cwiseAbs().maxCoeff() < 0.01);
        }
    }
}

TEST_CASE("emissions follow the state") {
    const auto m = two_by_two();
    const auto sim = simulate({m, 20000, 3, 5});
    double sum[2] = {0.0, 0.0};
    double n[2] = {0.0, 0.0};
    for (int t = 0; t < 20000; ++t) {
        const int s = sim.truth.coarse[static_cast<std::size_t>(t)];
        sum[s] += sim.panel.coarse()[t];
        n[s] += 1.0;
    }
    CHECK(sum[0] / n[0] == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(sum[1] / n[1] == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("one coarse and one fine observation") {
    const auto sim = simulate({two_by_two(), 1, 1, 0});
    CHECK(sim.panel.n_chunks() == 1);
    CHECK(sim.panel.n_fine_observations() == 1);
}
