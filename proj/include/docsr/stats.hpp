#pragma once

#include <string>
#include <vector>

#include "docsr/errors.hpp"

namespace docsr {

struct KruskalWallisResult {
    double h = 0.0;       // tie-corrected H statistic
    double p_value = 1.0; // chi-squared approximation, k-1 dof
    int df = 0;
};

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Dunn post hoc z statistics on pooled ranks with tie correction, raw
// two-sided normal p-values and Benjamini-Hochberg adjusted p-values over
// all pairs. z[i][j] > 0 means group i has the larger mean rank.
struct DunnBhResult {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> raw_p;
    std::vector<std::vector<double>> adj_p;
    std::vector<std::vector<std::string>> stars;  // NS / * / ** / ***
};

DunnBhResult dunn_bh(const std::vector<std::vector<double>>& groups);

// Step-up BH adjustment (monotone, clipped at 1), preserving input order.
std::vector<double> bh_adjust(const std::vector<double>& raw_p);

std::string significance_stars(double p);  // thresholds 0.05 / 0.01 / 0.001

// Survival functions used by the tests above.
double chi_squared_sf(double x, double df);
double normal_sf(double z);

// Average ranks (ties share the mean rank), plus the tie-group sizes.
std::vector<double> average_ranks(const std::vector<double>& values,
                                  std::vector<int>* tie_sizes = nullptr);

}  // namespace docsr
