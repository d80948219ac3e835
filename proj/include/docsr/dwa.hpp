#pragma once

#include <vector>

#include "docsr/losses.hpp"

namespace docsr {

// Dynamic weight averaging over the enabled loss components. Epoch-mean
// losses are recorded once per epoch; weights are a softmax over the
// descent ratios of the two most recent completed epochs, scaled so they
// sum to the number of active components. Components improving slowly
// (ratio near or above 1) receive larger weight.
struct DwaState {
    LossConfig config;
    double temperature = 2.0;
    double ratio_cap = 10.0;  // guards weight explosion when a loss hits 0
    std::vector<std::vector<double>> history;  // [component][epoch], enabled only
    WeightVector current;

    explicit DwaState(const LossConfig& cfg, double T = 2.0);

    int epochs_recorded() const;
};

// r_i(t) = L_i(t-1) / L_i(t-2), denominator clamped to 1e-12, capped at
// ratio_cap. Requires t >= 2.
double loss_ratio(const DwaState& state, LossComponent component, int t);

// All-ones for t < 2 (cold start); otherwise the softmax of ratios / T,
// computed with max subtraction, scaled by N_active.
WeightVector update_weights(const DwaState& state, int t);

// Appends epoch means; the breakdown must cover exactly the enabled set.
void record_epoch(DwaState& state, const LossBreakdown& means);

}  // namespace docsr
