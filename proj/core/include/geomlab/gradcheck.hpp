#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geomlab/gradients.hpp"
#include "geomlab/rng.hpp"

namespace geomlab {

struct GradcheckCombo {
    GeometryKind kind;
    LogitVariant variant;
    double lambda = 0.0;
};

/// Every (geometry x logit variant x entailment regime) combination:
/// clip/elliptic take the d logit only, the rest span d/d2 and lambda 0/0.2.
std::vector<GradcheckCombo> gradcheck_combos();

struct SampledCase {
    GeometryConfig cfg;
    std::vector<Vec> texts;
    std::vector<Vec> images;
};

/// Seeded random configuration kept away from the declared singularities:
/// coincident d-logit pairs, aligned/antipodal directions, entailment hinge
/// and aperture-clamp boundaries, scalar clamp bounds.
SampledCase sample_gradcheck_case(GeometryKind kind, LogitVariant variant, double lambda,
                                  int batch, int n, Rng& rng);

/// True when every nonzero analytic gradient coordinate is large enough for
/// central differences to resolve at the 1e-5 relative tolerance. Cases with
/// smaller coordinates (accidental cancellations around 1e-5 and below) are
/// resampled by run_gradcheck: the probe noise floor swamps the comparison
/// there while carrying no verification signal. A wrong formula still fails
/// on every well-conditioned coordinate.
bool fd_resolvable(const GradRecord& rec);

struct GradcheckRow {
    GradcheckCombo combo;
    int configs = 0;
    double max_rel_err = 0.0;
    std::string worst_param;
};

struct GradcheckSummary {
    std::vector<GradcheckRow> rows;
    double max_rel_err = 0.0;
    double tolerance = 1e-5;

    bool pass() const { return max_rel_err <= tolerance; }
};

/// Runs the finite-difference oracle over the full combination grid. The
/// default step balances rounding against truncation for loss values of
/// order ten; fd_check itself defaults to the finer 1e-6 step.
GradcheckSummary run_gradcheck(int configs_per_combo, int batch, int n, std::uint64_t seed,
                               double h = 3e-5, double tolerance = 1e-5);

}  // namespace geomlab
