#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hhmm/error.hpp"
#include "hhmm/model.hpp"
#include "hhmm/optimizer.hpp"
#include "hhmm/panel.hpp"
#include "hhmm/random.hpp"

namespace hhmm {

struct Interval {
    double lower;
    double upper;
};

/// Ranges for random starting values, one per parameter class.
struct StartRanges {
    Interval eta{-2.0, 0.0};              // every off-diagonal logit
    Interval log_scale_offset{-1.5, 0.0};  // added to log(sd of the data)
    Interval log_dof{0.6931471805599453, 3.4011973816621555};  // [ln 2, ln 30]
    Interval initial_logit{-1.0, 1.0};    // only with free initial distributions
};

struct FitConfig {
    int n_starts = 0;  // 0: default_start_count(parameter count)
    std::uint64_t seed = 0;
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    StartRanges ranges;
    bool free_initial = false;
    double dof_lower_bound = 1.0;
    // Emission scales are kept above this fraction of the data's standard
    // deviation (coarse and fine data separately).
    double relative_scale_floor = 1e-3;
    int threads = 1;
};

/// Starts grow with the number of parameters: clamp(k + 11, 10, 50).
int default_start_count(int n_parameters);

/// Throws ErrorKind::invalid_parameter for inconsistent settings.
void validate(const FitConfig& config);

struct RunDiagnostics {
    int start_index = 0;
    std::uint64_t seed = 0;
    double log_likelihood = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    double gradient_norm = 0.0;  // scaled, see scaled_gradient_norm
    std::string status;
};

struct FitResult {
    HierarchicalModel model;
    double log_likelihood = 0.0;
    int converged_runs = 0;
    std::vector<double> all_run_logliks;  // one per start, in start order
    double aic = 0.0;
    double bic = 0.0;
    int n_parameters = 0;
    int n_observations = 0;
    int best_start = 0;
    std::vector<RunDiagnostics> runs;
};

class FitFailure : public Error {
public:
    FitFailure(const std::string& message, std::vector<RunDiagnostics> runs)
        : Error(ErrorKind::fit_failure, message), runs_(std::move(runs)) {}

    const std::vector<RunDiagnostics>& runs() const noexcept { return runs_; }

private:
    std::vector<RunDiagnostics> runs_;
};

/// Negative log-likelihood over the unconstrained vector with the fitting
/// constraints (dof >= lower bound, scale floors) applied as a penalty, plus a
/// central-difference gradient that only recomputes the block a coordinate
/// belongs to (the coarse chain, or one fine model).
class FitObjective {
public:
    FitObjective(const ObservationPanel& panel, ParameterLayout layout, const FitConfig& config);

    double value(const Vector& x) const;
    Vector gradient(const Vector& x, double value_at_x) const;

    const ParameterLayout& layout() const noexcept { return layout_; }
    double coarse_scale_floor() const noexcept { return coarse_scale_floor_; }
    double fine_scale_floor() const noexcept { return fine_scale_floor_; }

private:
    struct Parts;
    bool feasible(const std::vector<ScaledTDistribution>& emissions, double floor) const;
    std::optional<Parts> evaluate_parts(const Vector& x) const;
    double coarse_value(const Parts& parts) const;

    const ObservationPanel& panel_;
    ParameterLayout layout_;
    double dof_lower_bound_;
    double coarse_scale_floor_;
    double fine_scale_floor_;
};

/// Random starting vector; locations come from quantile bands of the data
/// (band k of N for state k), log scales from the data spread.
Vector draw_start(const ObservationPanel& panel, const ParameterLayout& layout,
                  const StartRanges& ranges, Rng& rng);

/// Coarse states by ascending emission scale (ties: location), then the fine
/// states of every fine model the same way.
HierarchicalModel canonicalize(const HierarchicalModel& model);

double aic(double log_likelihood, int n_parameters);
double bic(double log_likelihood, int n_parameters, int n_observations);

/// Multi-start quasi-Newton maximum likelihood. Deterministic for a given
/// seed, independent of the thread count; ties on the log-likelihood go to
/// the lowest start index. Throws FitFailure when no start converges.
FitResult fit(const ObservationPanel& panel, int n_coarse, int n_fine, const FitConfig& config);

/// Single quasi-Newton run from a given model.
FitResult fit_from(const ObservationPanel& panel, const HierarchicalModel& start,
                   const FitConfig& config);

struct SelectionEntry {
    int n_coarse = 1;
    int n_fine = 1;
    std::optional<FitResult> result;
    std::string error;  // non-empty when the fit failed
    bool aic_best = false;
    bool bic_best = false;
};

struct SelectionTable {
    std::vector<SelectionEntry> entries;
    std::optional<std::size_t> aic_best;
    std::optional<std::size_t> bic_best;
};

/// Fits every candidate; failures are recorded per entry and do not stop
/// the grid.
SelectionTable select_order(const ObservationPanel& panel,
                            const std::vector<std::pair<int, int>>& candidates,
                            const FitConfig& config);

}  // namespace hhmm
