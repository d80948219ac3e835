#include "docsr/dwa.hpp"

#include <algorithm>
#include <cmath>

namespace docsr {
namespace {

std::vector<int> enabled_indices(const LossConfig& cfg) {
    std::vector<int> idx;
    for (int i = 0; i < kNumLoss; ++i)
        if (cfg.enabled[static_cast<size_t>(i)]) idx.push_back(i);
    return idx;
}

}  // namespace

DwaState::DwaState(const LossConfig& cfg, double T) : config(cfg), temperature(T) {
    if (!(T > 0.0)) throw ConfigError("dwa.temperature must be positive");
    history.resize(static_cast<size_t>(cfg.n_active()));
    current = WeightVector::ones(cfg);
}

int DwaState::epochs_recorded() const {
    return history.empty() ? 0 : static_cast<int>(history[0].size());
}

double loss_ratio(const DwaState& state, LossComponent component, int t) {
    if (t < 2) throw InsufficientHistoryError("dwa: loss_ratio needs two completed epochs");
    if (t > state.epochs_recorded())
        throw InsufficientHistoryError("dwa: epoch index beyond recorded history");
    auto idx = enabled_indices(state.config);
    int slot = -1;
    for (size_t i = 0; i < idx.size(); ++i)
        if (idx[i] == static_cast<int>(component)) slot = static_cast<int>(i);
    if (slot < 0) throw ContractError("dwa: component not enabled");
    double prev = state.history[static_cast<size_t>(slot)][static_cast<size_t>(t - 1)];
    double prev2 = state.history[static_cast<size_t>(slot)][static_cast<size_t>(t - 2)];
    double r = prev / std::max(prev2, 1e-12);
    return std::min(r, state.ratio_cap);
}

WeightVector update_weights(const DwaState& state, int t) {
    WeightVector w = WeightVector::ones(state.config);
    if (t < 2) return w;

    auto idx = enabled_indices(state.config);
    int n = static_cast<int>(idx.size());
    std::vector<double> r(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        r[static_cast<size_t>(i)] =
            loss_ratio(state, static_cast<LossComponent>(idx[static_cast<size_t>(i)]), t);

    double m = *std::max_element(r.begin(), r.end());
    double denom = 0.0;
    for (int i = 0; i < n; ++i)
        denom += std::exp((r[static_cast<size_t>(i)] - m) / state.temperature);
    for (int i = 0; i < n; ++i) {
        double num = std::exp((r[static_cast<size_t>(i)] - m) / state.temperature);
        w.lambda[static_cast<size_t>(idx[static_cast<size_t>(i)])] = n * num / denom;
    }
    w.validate();
    return w;
}

void record_epoch(DwaState& state, const LossBreakdown& means) {
    if (means.enabled != state.config.enabled)
        throw ContractError("dwa: breakdown component set does not match state");
    auto idx = enabled_indices(state.config);
    for (size_t i = 0; i < idx.size(); ++i) {
        double v = means.values[static_cast<size_t>(idx[i])];
        if (!std::isfinite(v)) throw ContractError("dwa: non-finite epoch mean");
        state.history[i].push_back(std::max(v, 1e-300));
    }
}

}  // namespace docsr
