#pragma once

#include <span>
#include <vector>

namespace misem::stats {

double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of fractional ranks (ties share their average rank).
double spearman(std::span<const double> x, std::span<const double> y);
/// Tie-corrected Kendall tau-b.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

/// 1-based fractional ranks.
std::vector<double> fractional_ranks(std::span<const double> values);

}  // namespace misem::stats
