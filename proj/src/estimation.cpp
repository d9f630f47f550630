#include "hhmm/estimation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <cmath>
#include <numeric>
#include <thread>

#include "hhmm/forward.hpp"
#include "hhmm/likelihood.hpp"

namespace hhmm {

namespace {

std::vector<double> pooled_fine(const ObservationPanel& panel) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(panel.n_fine_observations()));
    for (const auto& c : panel.fine()) out.insert(out.end(), c.data(), c.data() + c.size());
    return out;
}

double std_dev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Spread used for starting scales and scale floors; falls back to the mean
// absolute value, then 1, for degenerate data.
double spread(const std::vector<double>& v) {
    const double sd = std_dev(v);
    if (sd > 0.0) return sd;
    double mav = 0.0;
    for (double x : v) mav += std::fabs(x);
    mav = v.empty() ? 0.0 : mav / static_cast<double>(v.size());
    return mav > 0.0 ? mav : 1.0;
}

double empirical_quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

void append_random_emissions(const std::vector<double>& sorted, double log_spread, int n_states,
                             const StartRanges& ranges, Rng& rng, std::vector<double>& out) {
    for (int k = 0; k < n_states; ++k) {
        const double q = (k + rng.uniform()) / n_states;
        out.push_back(empirical_quantile(sorted, q));
        out.push_back(log_spread + rng.uniform(ranges.log_scale_offset.lower,
                                               ranges.log_scale_offset.upper));
        out.push_back(rng.uniform(ranges.log_dof.lower, ranges.log_dof.upper));
    }
}

void append_uniform(int count, const Interval& range, Rng& rng, std::vector<double>& out) {
    for (int k = 0; k < count; ++k) out.push_back(rng.uniform(range.lower, range.upper));
}

bool is_penalty(double v) { return !std::isfinite(v) || v >= kObjectivePenalty; }

std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

std::vector<int> order_by_scale(const std::vector<ScaledTDistribution>& emissions) {
    std::vector<int> order(emissions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ea = emissions[static_cast<std::size_t>(a)];
        const auto& eb = emissions[static_cast<std::size_t>(b)];
        if (ea.scale() != eb.scale()) return ea.scale() < eb.scale();
        return ea.location() < eb.location();
    });
    return order;
}

}  // namespace

int default_start_count(int n_parameters) { return std::clamp(n_parameters + 11, 10, 50); }

void validate(const FitConfig& config) {
    auto bad = [](const char* what) { throw Error(ErrorKind::invalid_parameter, what); };
    if (config.n_starts < 0) bad("n_starts must be >= 0");
    if (config.max_iterations < 1) bad("max_iterations must be >= 1");
    if (!(config.gradient_tolerance > 0.0)) bad("gradient tolerance must be > 0");
    if (config.threads < 1) bad("threads must be >= 1");
    if (!(config.dof_lower_bound > 0.0)) bad("dof lower bound must be > 0");
    if (!(config.relative_scale_floor >= 0.0)) bad("relative scale floor must be >= 0");
    for (const auto* r : {&config.ranges.eta, &config.ranges.log_scale_offset,
                          &config.ranges.log_dof, &config.ranges.initial_logit}) {
        if (!(r->lower <= r->upper) || !std::isfinite(r->lower) || !std::isfinite(r->upper)) {
            bad("starting value ranges must be finite with lower <= upper");
        }
    }
}

struct FitObjective::Parts {
    CoarseBlock coarse;
    Vector coarse_initial;
    std::vector<FineModel> fine;
    Matrix chunk_ll;
};

FitObjective::FitObjective(const ObservationPanel& panel, ParameterLayout layout,
                           const FitConfig& config)
    : panel_(panel),
      layout_(layout),
      dof_lower_bound_(config.dof_lower_bound),
      coarse_scale_floor_(0.0),
      fine_scale_floor_(0.0) {
    const Vector& c = panel.coarse();
    coarse_scale_floor_ =
        config.relative_scale_floor * spread(std::vector<double>(c.data(), c.data() + c.size()));
    fine_scale_floor_ = config.relative_scale_floor * spread(pooled_fine(panel));
}

bool FitObjective::feasible(const std::vector<ScaledTDistribution>& emissions, double floor) const {
    return std::all_of(emissions.begin(), emissions.end(), [&](const ScaledTDistribution& e) {
        return e.dof() >= dof_lower_bound_ && e.scale() >= floor && std::isfinite(e.scale()) &&
               std::isfinite(e.dof());
    });
}

std::optional<FitObjective::Parts> FitObjective::evaluate_parts(const Vector& x) const {
    if (x.size() != layout_.size()) throw Error(ErrorKind::layout, "objective vector has wrong length");
    const auto values = as_span(x);
    const auto cs = static_cast<std::size_t>(layout_.coarse_block_size());
    const auto fs = static_cast<std::size_t>(layout_.fine_block_size());
    try {
        auto coarse = unpack_coarse_block(values.subspan(0, cs), layout_);
        if (!feasible(coarse.emissions, coarse_scale_floor_)) return std::nullopt;
        Vector initial =
            coarse.initial ? *coarse.initial : stationary_distribution(coarse.tpm).probabilities();
        Parts parts{std::move(coarse), std::move(initial), {}, Matrix(panel_.n_chunks(), layout_.n_coarse)};
        for (int i = 0; i < layout_.n_coarse; ++i) {
            auto fm = unpack_fine_block(
                values.subspan(static_cast<std::size_t>(layout_.fine_block_offset(i)), fs), layout_);
            if (!feasible(fm.emissions, fine_scale_floor_)) return std::nullopt;
            parts.chunk_ll.col(i) = chunk_log_likelihoods(fm, panel_);
            parts.fine.push_back(std::move(fm));
        }
        return parts;
    } catch (const Error&) {
        return std::nullopt;
    }
}

double FitObjective::coarse_value(const Parts& parts) const {
    const double ll = coarse_log_likelihood(parts.coarse.tpm, parts.coarse_initial,
                                            parts.coarse.emissions, panel_.coarse(), parts.chunk_ll);
    return std::isfinite(ll) ? -ll : kObjectivePenalty;
}

double FitObjective::value(const Vector& x) const {
    const auto parts = evaluate_parts(x);
    return parts ? coarse_value(*parts) : kObjectivePenalty;
}

Vector FitObjective::gradient(const Vector& x, double value_at_x) const {
    Vector g = Vector::Zero(x.size());
    const auto base = evaluate_parts(x);
    if (!base) return g;

    const int cs = layout_.coarse_block_size();
    const int fs = layout_.fine_block_size();
    std::vector<double> block;

    auto perturbed = [&](Eigen::Index j, double shifted) -> double {
        try {
            if (j < cs) {
                block.assign(x.data(), x.data() + cs);
                block[static_cast<std::size_t>(j)] = shifted;
                auto coarse = unpack_coarse_block(block, layout_);
                if (!feasible(coarse.emissions, coarse_scale_floor_)) return kObjectivePenalty;
                const Vector initial = coarse.initial
                                           ? *coarse.initial
                                           : stationary_distribution(coarse.tpm).probabilities();
                const double ll = coarse_log_likelihood(coarse.tpm, initial, coarse.emissions,
                                                        panel_.coarse(), base->chunk_ll);
                return std::isfinite(ll) ? -ll : kObjectivePenalty;
            }
            const int i = (static_cast<int>(j) - cs) / fs;
            const int offset = layout_.fine_block_offset(i);
            block.assign(x.data() + offset, x.data() + offset + fs);
            block[static_cast<std::size_t>(j - offset)] = shifted;
            const auto fm = unpack_fine_block(block, layout_);
            if (!feasible(fm.emissions, fine_scale_floor_)) return kObjectivePenalty;
            Matrix chunk_ll = base->chunk_ll;
            chunk_ll.col(i) = chunk_log_likelihoods(fm, panel_);
            const double ll = coarse_log_likelihood(base->coarse.tpm, base->coarse_initial,
                                                    base->coarse.emissions, panel_.coarse(), chunk_ll);
            return std::isfinite(ll) ? -ll : kObjectivePenalty;
        } catch (const Error&) {
            return kObjectivePenalty;
        }
    };

    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = finite_difference_step(x[j]);
        const double up = perturbed(j, x[j] + h);
        const double down = perturbed(j, x[j] - h);
        const bool up_ok = !is_penalty(up);
        const bool down_ok = !is_penalty(down);
        if (up_ok && down_ok) {
            g[j] = (up - down) / (2.0 * h);
        } else if (up_ok) {
            g[j] = (up - value_at_x) / h;
        } else if (down_ok) {
            g[j] = (value_at_x - down) / h;
        }
    }
    return g;
}

Vector draw_start(const ObservationPanel& panel, const ParameterLayout& layout,
                  const StartRanges& ranges, Rng& rng) {
    const Vector& c = panel.coarse();
    std::vector<double> coarse(c.data(), c.data() + c.size());
    std::vector<double> fine = pooled_fine(panel);
    const double coarse_log_spread = std::log(spread(coarse));
    const double fine_log_spread = std::log(spread(fine));
    std::sort(coarse.begin(), coarse.end());
    std::sort(fine.begin(), fine.end());

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(layout.size()));
    append_uniform(layout.n_coarse * (layout.n_coarse - 1), ranges.eta, rng, out);
    append_random_emissions(coarse, coarse_log_spread, layout.n_coarse, ranges, rng, out);
    if (layout.free_initial) append_uniform(layout.n_coarse - 1, ranges.initial_logit, rng, out);
    for (int i = 0; i < layout.n_coarse; ++i) {
        append_uniform(layout.n_fine * (layout.n_fine - 1), ranges.eta, rng, out);
        append_random_emissions(fine, fine_log_spread, layout.n_fine, ranges, rng, out);
        if (layout.free_initial) append_uniform(layout.n_fine - 1, ranges.initial_logit, rng, out);
    }
    return Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

HierarchicalModel canonicalize(const HierarchicalModel& model) {
    const auto coarse_order = order_by_scale(model.coarse_emissions());
    HierarchicalModel out = permute_coarse_states(model, coarse_order);
    for (int i = 0; i < out.n_coarse(); ++i) {
        const auto fine_order = order_by_scale(out.fine_model(i).emissions);
        out = permute_fine_states(out, i, fine_order);
    }
    return out;
}

double aic(double log_likelihood, int n_parameters) {
    return -2.0 * log_likelihood + 2.0 * n_parameters;
}

double bic(double log_likelihood, int n_parameters, int n_observations) {
    return -2.0 * log_likelihood + n_parameters * std::log(static_cast<double>(n_observations));
}

namespace {

struct RunOutcome {
    RunDiagnostics diagnostics;
    Vector x;
};

RunOutcome run_from(const FitObjective& objective, const Vector& start, const FitConfig& config,
                    int index, std::uint64_t seed) {
    BfgsOptions options;
    options.max_iterations = config.max_iterations;
    options.gradient_tolerance = config.gradient_tolerance;
    const auto result = minimize_bfgs(
        [&](const Vector& x) { return objective.value(x); },
        [&](const Vector& x, double f) { return objective.gradient(x, f); }, start, options);
    RunOutcome out;
    out.diagnostics.start_index = index;
    out.diagnostics.seed = seed;
    out.diagnostics.log_likelihood = is_penalty(result.value) ? -std::numeric_limits<double>::infinity()
                                                              : -result.value;
    out.diagnostics.iterations = result.iterations;
    out.diagnostics.evaluations = result.evaluations;
    out.diagnostics.converged = result.converged && !is_penalty(result.value);
    out.diagnostics.gradient_norm =
        result.gradient.size() ? scaled_gradient_norm(result.gradient, result.value) : 0.0;
    out.diagnostics.status = result.status;
    out.x = result.x;
    return out;
}

FitResult assemble(const ObservationPanel& panel, const ParameterLayout& layout,
                   std::vector<RunOutcome> outcomes) {
    std::vector<RunDiagnostics> runs;
    std::vector<double> logliks;
    std::optional<std::size_t> best;
    int converged = 0;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        const auto& d = outcomes[s].diagnostics;
        runs.push_back(d);
        logliks.push_back(d.log_likelihood);
        if (!d.converged) continue;
        ++converged;
        if (!best || d.log_likelihood > outcomes[*best].diagnostics.log_likelihood) best = s;
    }
    if (!best) {
        throw FitFailure("no optimizer run converged (" + std::to_string(outcomes.size()) +
                             " starts)",
                         std::move(runs));
    }
    const int k = layout.size();
    const int n = panel.total_observations();
    const double ll = logliks[*best];
    HierarchicalModel model = canonicalize(unpack(as_span(outcomes[*best].x), layout));
    return FitResult{std::move(model), ll,        converged, std::move(logliks),
                     aic(ll, k),       bic(ll, k, n), k,     n,
                     static_cast<int>(*best), std::move(runs)};
}

}  // namespace

FitResult fit(const ObservationPanel& panel, int n_coarse, int n_fine, const FitConfig& config) {
    validate(config);
    if (n_coarse < 1 || n_fine < 1) {
        throw Error(ErrorKind::invalid_parameter, "state counts must be >= 1");
    }
    const ParameterLayout layout{n_coarse, n_fine, config.free_initial};
    const int n_starts = config.n_starts > 0 ? config.n_starts : default_start_count(layout.size());
    const FitObjective objective(panel, layout, config);

    std::vector<RunOutcome> outcomes(static_cast<std::size_t>(n_starts));
    auto run_start = [&](int s) {
        const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(s));
        Rng rng(seed);
        Vector start = draw_start(panel, layout, config.ranges, rng);
        for (int retry = 0; retry < 20 && is_penalty(objective.value(start)); ++retry) {
            start = draw_start(panel, layout, config.ranges, rng);
        }
        outcomes[static_cast<std::size_t>(s)] = run_from(objective, start, config, s, seed);
    };

    const int threads = std::min(config.threads, n_starts);
    if (threads <= 1) {
        for (int s = 0; s < n_starts; ++s) run_start(s);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (int s = next++; s < n_starts; s = next++) {
                    try {
                        run_start(s);
                    } catch (...) {
                        const std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    return assemble(panel, layout, std::move(outcomes));
}

FitResult fit_from(const ObservationPanel& panel, const HierarchicalModel& start,
                   const FitConfig& config) {
    validate(config);
    const ParameterLayout layout{start.n_coarse(), start.n_fine(), config.free_initial};
    const FitObjective objective(panel, layout, config);
    std::vector<RunOutcome> outcomes;
    outcomes.push_back(run_from(objective, pack(start, layout), config, 0, config.seed));
    return assemble(panel, layout, std::move(outcomes));
}

SelectionTable select_order(const ObservationPanel& panel,
                            const std::vector<std::pair<int, int>>& candidates,
                            const FitConfig& config) {
    if (candidates.empty()) {
        throw Error(ErrorKind::invalid_parameter, "model selection needs at least one candidate");
    }
    SelectionTable table;
    for (const auto& [n_coarse, n_fine] : candidates) {
        SelectionEntry entry;
        entry.n_coarse = n_coarse;
        entry.n_fine = n_fine;
        try {
            entry.result = fit(panel, n_coarse, n_fine, config);
        } catch (const Error& e) {
            entry.error = e.what();
        }
        table.entries.push_back(std::move(entry));
    }
    for (std::size_t k = 0; k < table.entries.size(); ++k) {
        const auto& r = table.entries[k].result;
        if (!r) continue;
        if (!table.aic_best || r->aic < table.entries[*table.aic_best].result->aic) table.aic_best = k;
        if (!table.bic_best || r->bic < table.entries[*table.bic_best].result->bic) table.bic_best = k;
    }
    if (table.aic_best) table.entries[*table.aic_best].aic_best = true;
    if (table.bic_best) table.entries[*table.bic_best].bic_best = true;
    return table;
}

}  // namespace hhmm
