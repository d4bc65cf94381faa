#include "paco/rankmetrics.hpp"

#include <cstdio>
#include <string>

#include "paco/tensor.hpp"

namespace paco {

namespace {
// rank position of each candidate id: ranks[c] = index of c in the ordering
std::vector<int> rank_positions(const std::vector<int>& order) {
  std::vector<int> ranks(order.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    int c = order[i];
    if (c < 0 || c >= static_cast<int>(order.size()) || ranks[c] != -1)
      throw DataError("rankmetrics: not a valid permutation");
    ranks[c] = static_cast<int>(i);
  }
  return ranks;
}

void check_arity(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DataError("rankmetrics: arity mismatch");
}
}  // namespace

double kendall_tau(const std::vector<int>& predicted,
                   const std::vector<int>& annotated) {
  check_arity(predicted, annotated);
  auto pr = rank_positions(predicted);
  auto ar = rank_positions(annotated);
  int k = static_cast<int>(pr.size());
  int concordant = 0, discordant = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      int s = (pr[i] - pr[j]) * (ar[i] - ar[j]);
      if (s > 0)
        ++concordant;
      else
        ++discordant;
    }
  double pairs = k * (k - 1) / 2.0;
  return (concordant - discordant) / pairs;
}

double spearman_rho(const std::vector<int>& predicted,
                    const std::vector<int>& annotated) {
  check_arity(predicted, annotated);
  auto pr = rank_positions(predicted);
  auto ar = rank_positions(annotated);
  int k = static_cast<int>(pr.size());
  double d2 = 0.0;
  for (int i = 0; i < k; ++i) {
    double d = pr[i] - ar[i];
    d2 += d * d;
  }
  return 1.0 - 6.0 * d2 / (static_cast<double>(k) * (k * k - 1));
}

double t1b1_accuracy(std::span<const RankingPairSample> samples) {
  if (samples.empty()) throw DataError("t1b1_accuracy: no samples");
  std::size_t hits = 0;
  for (const auto& s : samples) {
    check_arity(s.predicted, s.annotated);
    if (s.predicted.front() == s.annotated.front() &&
        s.predicted.back() == s.annotated.back())
      ++hits;
  }
  return static_cast<double>(hits) / samples.size();
}

double position_accuracy(std::span<const RankingPairSample> samples) {
  if (samples.empty()) throw DataError("position_accuracy: no samples");
  double total = 0.0;
  for (const auto& s : samples) {
    check_arity(s.predicted, s.annotated);
    int match = 0;
    for (std::size_t i = 0; i < s.predicted.size(); ++i)
      if (s.predicted[i] == s.annotated[i]) ++match;
    total += static_cast<double>(match) / s.predicted.size();
  }
  return total / samples.size();
}

MetricRow summarize(const std::string& method,
                    std::span<const RankingPairSample> samples,
                    double pairwise_acc) {
  MetricRow row;
  row.method = method;
  row.accuracy = position_accuracy(samples);
  double tau = 0, rho = 0;
  for (const auto& s : samples) {
    tau += kendall_tau(s.predicted, s.annotated);
    rho += spearman_rho(s.predicted, s.annotated);
  }
  row.tau = tau / samples.size();
  row.rho = rho / samples.size();
  row.t1b1 = t1b1_accuracy(samples);
  row.pairwise_acc = pairwise_acc;
  row.n_samples = samples.size();
  return row;
}

std::string metric_csv_header() {
  return "method,accuracy,tau,rho,t1b1,pairwise_acc,n_samples";
}

std::string metric_csv_row(const MetricRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%zu",
                row.method.c_str(), row.accuracy, row.tau, row.rho, row.t1b1,
                row.pairwise_acc, row.n_samples);
  return buf;
}

}  // namespace paco
