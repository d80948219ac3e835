#include "docsr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace docsr {
namespace {

// Regularized upper incomplete gamma Q(a, x): series for x < a+1,
// continued fraction otherwise.
double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ContractError("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        return 1.0 - p;
    }
    double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_squared_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return gamma_q(df / 2.0, x / 2.0);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::vector<double> average_ranks(const std::vector<double>& values,
                                  std::vector<int>* tie_sizes) {
    size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        if (tie_sizes && j > i) tie_sizes->push_back(static_cast<int>(j - i + 1));
        i = j + 1;
    }
    return ranks;
}

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw ContractError("kruskal_wallis: need >= 2 groups");
    for (const auto& g : groups)
        if (g.empty()) throw ContractError("kruskal_wallis: empty group");

    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    std::vector<int> ties;
    std::vector<double> ranks = average_ranks(pooled, &ties);

    double n = static_cast<double>(pooled.size());
    double h = 0.0;
    size_t offset = 0;
    for (const auto& g : groups) {
        double rsum = 0.0;
        for (size_t i = 0; i < g.size(); ++i) rsum += ranks[offset + i];
        h += rsum * rsum / static_cast<double>(g.size());
        offset += g.size();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    double tie_term = 0.0;
    for (int t : ties) tie_term += static_cast<double>(t) * t * t - t;
    double correction = 1.0 - tie_term / (n * n * n - n);
    if (correction <= 0.0)
        throw ContractError("kruskal_wallis: all values identical (no rank variance)");
    h /= correction;

    KruskalWallisResult out;
    out.h = h;
    out.df = static_cast<int>(groups.size()) - 1;
    out.p_value = chi_squared_sf(h, static_cast<double>(out.df));
    return out;
}

std::vector<double> bh_adjust(const std::vector<double>& raw_p) {
    size_t m = raw_p.size();
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return raw_p[a] < raw_p[b]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (size_t k = m; k > 0; --k) {
        size_t idx = order[k - 1];
        double candidate = raw_p[idx] * static_cast<double>(m) / static_cast<double>(k);
        running = std::min(running, candidate);
        adj[idx] = std::min(running, 1.0);
    }
    return adj;
}

std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "NS";
}

DunnBhResult dunn_bh(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw ContractError("dunn_bh: need >= 2 groups");
    for (const auto& g : groups)
        if (g.empty()) throw ContractError("dunn_bh: empty group");

    size_t k = groups.size();
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    std::vector<int> ties;
    std::vector<double> ranks = average_ranks(pooled, &ties);
    double n = static_cast<double>(pooled.size());

    std::vector<double> mean_rank(k);
    size_t offset = 0;
    for (size_t g = 0; g < k; ++g) {
        double rsum = 0.0;
        for (size_t i = 0; i < groups[g].size(); ++i) rsum += ranks[offset + i];
        mean_rank[g] = rsum / static_cast<double>(groups[g].size());
        offset += groups[g].size();
    }

    double tie_term = 0.0;
    for (int t : ties) tie_term += static_cast<double>(t) * t * t - t;
    double var_base = n * (n + 1.0) / 12.0 - tie_term / (12.0 * (n - 1.0));

    DunnBhResult out;
    out.z.assign(k, std::vector<double>(k, 0.0));
    out.raw_p.assign(k, std::vector<double>(k, 1.0));
    out.adj_p.assign(k, std::vector<double>(k, 1.0));
    out.stars.assign(k, std::vector<std::string>(k, "NS"));

    std::vector<double> flat;
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = i + 1; j < k; ++j) {
            double se = std::sqrt(var_base * (1.0 / groups[i].size() + 1.0 / groups[j].size()));
            double z = se > 0 ? (mean_rank[i] - mean_rank[j]) / se : 0.0;
            out.z[i][j] = z;
            out.z[j][i] = -z;
            double p = 2.0 * normal_sf(std::fabs(z));
            p = std::min(p, 1.0);
            out.raw_p[i][j] = out.raw_p[j][i] = p;
            flat.push_back(p);
        }
    }
    std::vector<double> adj = bh_adjust(flat);
    size_t idx = 0;
    for (size_t i = 0; i < k; ++i)
        for (size_t j = i + 1; j < k; ++j) {
            out.adj_p[i][j] = out.adj_p[j][i] = adj[idx];
            out.stars[i][j] = out.stars[j][i] = significance_stars(adj[idx]);
            ++idx;
        }
    return out;
}

}  // namespace docsr
