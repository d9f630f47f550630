#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hhmm/estimation.hpp"
#include "hhmm/likelihood.hpp"
#include "hhmm/optimizer.hpp"
#include "hhmm/simulation.hpp"
#include "oracles.hpp"

using namespace hhmm;

namespace {

HierarchicalModel separated_22() {
    const Matrix sticky{{0.9, 0.1}, {0.1, 0.9}};
    const FineModel f1{TransitionMatrix(sticky),
                       {ScaledTDistribution(-1.5, 1.0, 6.0), ScaledTDistribution(1.5, 1.0, 6.0)}, std::nullopt};
    const FineModel f2{TransitionMatrix(sticky),
                       {ScaledTDistribution(-1.5, 3.0, 6.0), ScaledTDistribution(1.5, 3.0, 6.0)}, std::nullopt};
    return HierarchicalModel(TransitionMatrix(sticky),
                             {ScaledTDistribution(-1.5, 1.0, 6.0), ScaledTDistribution(1.5, 3.0, 6.0)}, {f1, f2});
}

HierarchicalModel iid_model(double loc, double scale, double dof) {
    return HierarchicalModel(TransitionMatrix::identity(1), {ScaledTDistribution(loc, scale, dof)},
                             {FineModel{TransitionMatrix::identity(1), {ScaledTDistribution(loc, scale, dof)},
                                        std::nullopt}});
}

FitConfig quick(int starts, std::uint64_t seed = 1) {
    FitConfig c;
    c.n_starts = starts;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("start counts and config validation") {
    CHECK(default_start_count(6) == 17);
    CHECK(default_start_count(39) == 50);
    CHECK(default_start_count(24) == 35);
    CHECK(default_start_count(100) == 50);
    FitConfig c;
    CHECK_NOTHROW(validate(c));
    c.gradient_tolerance = 0.0;
    CHECK_THROWS_AS(validate(c), Error);
    c = FitConfig{};
    c.n_starts = -1;
    CHECK_THROWS_AS(validate(c), Error);
    c = FitConfig{};
    c.ranges.eta = {1.0, 0.0};
    CHECK_THROWS_AS(validate(c), Error);
    c = FitConfig{};
    c.max_iterations = 0;
    CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("information criteria") {
    CHECK(aic(-100.0, 6) == 212.0);
    CHECK(bic(-100.0, 6, 100) == doctest::Approx(200.0 + 6.0 * std::log(100.0)));
    // ln(n) > 2 makes the BIC penalty the larger one.
    for (int n : {8, 100, 10000}) CHECK(bic(0.0, 5, n) - aic(0.0, 5) > 0.0);
    CHECK(bic(0.0, 5, 7) < aic(0.0, 5));
}

TEST_CASE("BFGS on smooth test functions") {
    const auto rosen = [](const Vector& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    const auto grad = [&](const Vector& x, double) { return central_difference_gradient(rosen, x); };
    Vector x0(2);
    x0 << -1.2, 1.0;
    const auto r = minimize_bfgs(rosen, grad, x0);
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));
    for (std::size_t k = 1; k < r.trace.size(); ++k) REQUIRE(r.trace[k] <= r.trace[k - 1]);

    const auto quad = [](const Vector& x) { return (x.array() - 3.0).square().sum(); };
    const auto qgrad = [](const Vector& x, double) -> Vector { return 2.0 * (x.array() - 3.0).matrix(); };
    const auto q = minimize_bfgs(quad, qgrad, Vector::Zero(5));
    CHECK(q.converged);
    CHECK((q.x.array() - 3.0).abs().maxCoeff() < 1e-6);

    BfgsOptions capped;
    capped.max_iterations = 1;
    CHECK_FALSE(minimize_bfgs(rosen, grad, x0, capped).converged);
}

TEST_CASE("finite-difference gradient") {
    const auto f = [](const Vector& x) { return std::sin(x[0]) * std::exp(x[1]); };
    Vector x(2);
    x << 0.3, -0.7;
    const Vector g = central_difference_gradient(f, x);
    CHECK(g[0] == doctest::Approx(std::cos(0.3) * std::exp(-0.7)).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(std::sin(0.3) * std::exp(-0.7)).epsilon(1e-9));
    CHECK(finite_difference_step(0.0) == doctest::Approx(std::cbrt(std::numeric_limits<double>::epsilon())));
}

TEST_CASE("block-wise objective gradient matches the plain one") {
    Rng rng(5);
    const auto m = oracle::random_model(2, 2, rng);
    const auto sim = simulate({m, 15, 6, 3});
    const ParameterLayout layout{2, 2, false};
    const FitObjective objective(sim.panel, layout, FitConfig{});
    const Vector x = pack(m);
    const double f = objective.value(x);
    CHECK(f == doctest::Approx(-hhmm_log_likelihood(m, sim.panel)).epsilon(1e-12));
    const Vector blocked = objective.gradient(x, f);
    const Vector plain = central_difference_gradient([&](const Vector& v) { return objective.value(v); }, x);
    CHECK((blocked - plain).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, plain.cwiseAbs().maxCoeff()));
}

TEST_CASE("objective penalises infeasible emissions") {
    Rng rng(6);
    const auto m = oracle::random_model(1, 1, rng);
    const auto sim = simulate({m, 10, 5, 1});
    const FitObjective objective(sim.panel, ParameterLayout{1, 1, false}, FitConfig{});
    Vector x = pack(m);
    x[2] = std::log(0.5);  // coarse dof below 1
    CHECK(objective.value(x) == kObjectivePenalty);
    x = pack(m);
    x[1] = std::log(objective.coarse_scale_floor() * 0.5);
    CHECK(objective.value(x) == kObjectivePenalty);
}

TEST_CASE("single-state fit recovers the location") {
    const auto truth = iid_model(0.4, 1.0, 5.0);
    const auto sim = simulate({truth, 100, 30, 9});
    const auto r = fit(sim.panel, 1, 1, quick(3));
    // Fine location from 3000 points; sd of t(5) is sqrt(5/3).
    const double se = std::sqrt(5.0 / 3.0) / std::sqrt(3000.0);
    CHECK(std::fabs(r.model.fine_model(0).emissions[0].location() - 0.4) < 3.0 * se);
    CHECK(r.n_parameters == 6);
    CHECK(r.n_observations == 3100);
    CHECK(r.log_likelihood >= hhmm_log_likelihood(truth, sim.panel));
}

TEST_CASE("fit properties on a (2,2) panel") {
    const auto truth = separated_22();
    const auto sim = simulate({truth, 60, 15, 4});
    FitConfig c = quick(4, 7);
    c.max_iterations = 300;
    const auto r = fit(sim.panel, 2, 2, c);

    SUBCASE("best of starts") {
        REQUIRE(r.all_run_logliks.size() == 4);
        for (std::size_t s = 0; s < 4; ++s) {
            if (r.runs[s].converged) CHECK(r.log_likelihood >= r.all_run_logliks[s]);
        }
        CHECK(r.runs[static_cast<std::size_t>(r.best_start)].converged);
        CHECK(r.aic == doctest::Approx(-2.0 * r.log_likelihood + 2.0 * 24));
        CHECK(r.bic == doctest::Approx(-2.0 * r.log_likelihood + 24.0 * std::log(60.0 + 900.0)));
    }
    SUBCASE("reported model reproduces the likelihood and is canonical") {
        CHECK(hhmm_log_likelihood(r.model, sim.panel) == doctest::Approx(r.log_likelihood).epsilon(1e-10));
        CHECK(r.model.coarse_emissions()[0].scale() <= r.model.coarse_emissions()[1].scale());
        for (int i = 0; i < 2; ++i) {
            CHECK(r.model.fine_model(i).emissions[0].scale() <= r.model.fine_model(i).emissions[1].scale());
        }
    }
    SUBCASE("relabelling leaves the likelihood unchanged") {
        const std::vector<int> swap{1, 0};
        CHECK(hhmm_log_likelihood(permute_coarse_states(r.model, swap), sim.panel) ==
              doctest::Approx(r.log_likelihood).epsilon(1e-12));
    }
    SUBCASE("gradient at the optimum") {
        const ParameterLayout layout{2, 2, false};
        const FitObjective objective(sim.panel, layout, c);
        const Vector x = pack(r.model);
        const Vector g = central_difference_gradient([&](const Vector& v) { return objective.value(v); }, x);
        CHECK(scaled_gradient_norm(g, objective.value(x)) < 10.0 * c.gradient_tolerance);
    }
    SUBCASE("deterministic for a seed, independent of threads") {
        FitConfig threaded = c;
        threaded.threads = 3;
        const auto again = fit(sim.panel, 2, 2, threaded);
        CHECK(again.log_likelihood == r.log_likelihood);
        CHECK(again.all_run_logliks == r.all_run_logliks);
        CHECK(pack(again.model) == pack(r.model));
    }
}

TEST_CASE("refitting from the truth never lowers the likelihood") {
    const auto truth = separated_22();
    const auto sim = simulate({truth, 40, 15, 11});
    const auto r = fit_from(sim.panel, truth, quick(1));
    CHECK(r.log_likelihood >= hhmm_log_likelihood(truth, sim.panel));
}

TEST_CASE("fit failure carries per-run diagnostics") {
    const auto sim = simulate({separated_22(), 30, 10, 2});
    FitConfig c = quick(2);
    c.max_iterations = 1;
    try {
        fit(sim.panel, 2, 2, c);
        FAIL("expected a fit failure");
    } catch (const FitFailure& e) {
        CHECK(e.kind() == ErrorKind::fit_failure);
        REQUIRE(e.runs().size() == 2);
        CHECK_FALSE(e.runs()[0].converged);
    }
    CHECK_THROWS_AS(fit(sim.panel, 0, 2, quick(1)), Error);
}

TEST_CASE("canonical ordering") {
    Rng rng(8);
    const auto m = oracle::random_model(3, 3, rng);
    const auto c = canonicalize(m);
    for (int i = 0; i + 1 < 3; ++i) {
        CHECK(c.coarse_emissions()[static_cast<std::size_t>(i)].scale() <=
              c.coarse_emissions()[static_cast<std::size_t>(i + 1)].scale());
    }
    const auto panel = oracle::random_panel(4, 3, rng);
    CHECK(hhmm_log_likelihood(c, panel) == doctest::Approx(hhmm_log_likelihood(m, panel)).epsilon(1e-12));
    CHECK(pack(canonicalize(c)) == pack(c));
}

TEST_CASE("order selection") {
    const auto sim = simulate({iid_model(0.0, 1.0, 5.0), 20, 10, 3});
    SUBCASE("single candidate is best under both criteria") {
        const auto t = select_order(sim.panel, {{1, 1}}, quick(2));
        REQUIRE(t.entries.size() == 1);
        CHECK(t.entries[0].aic_best);
        CHECK(t.entries[0].bic_best);
    }
    SUBCASE("failed candidates do not stop the grid") {
        FitConfig c = quick(1);
        c.max_iterations = 1;
        const auto t = select_order(sim.panel, {{1, 1}, {2, 1}}, c);
        CHECK(t.entries.size() == 2);
        CHECK_FALSE(t.entries[1].error.empty());
    }
    CHECK_THROWS_AS(select_order(sim.panel, {}, quick(1)), Error);
}
