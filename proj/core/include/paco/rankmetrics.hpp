#pragma once

#include <span>
#include <string>
#include <vector>

namespace paco {

// One benchmark instance outcome: both orderings list candidate ids
// best-to-worst.
struct RankingPairSample {
  std::vector<int> predicted;
  std::vector<int> annotated;
};

// (concordant - discordant) / C(k,2) over rank positions.
double kendall_tau(const std::vector<int>& predicted,
                   const std::vector<int>& annotated);

// 1 - 6 sum d_i^2 / (k(k^2-1)); permutations have no ties.
double spearman_rho(const std::vector<int>& predicted,
                    const std::vector<int>& annotated);

// Fraction of samples where both the top-1 and the bottom-1 match.
double t1b1_accuracy(std::span<const RankingPairSample> samples);

// Mean fraction of candidates placed at their annotated rank.
double position_accuracy(std::span<const RankingPairSample> samples);

struct MetricRow {
  std::string method;
  double accuracy = 0;
  double tau = 0;
  double rho = 0;
  double t1b1 = 0;
  double pairwise_acc = 0;
  std::size_t n_samples = 0;
};

MetricRow summarize(const std::string& method,
                    std::span<const RankingPairSample> samples,
                    double pairwise_acc);

std::string metric_csv_header();
std::string metric_csv_row(const MetricRow& row);

}  // namespace paco
