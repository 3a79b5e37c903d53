#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "sage/composers.hpp"
#include "sage/evidence.hpp"

namespace sage {

/// What the deployed system returned for one input.
struct EvalOutcome {
  std::uint64_t id = 0;
  bool offloaded = false;
  ClassIndex final_pred = 0;
  bool correct = false;
  std::uint32_t budget_used = 0;
  Method method = Method::Sage;
};

/// Integer tallies behind the accuracy figures.
struct OutcomeCounts {
  std::uint64_t total = 0;
  std::uint64_t offloaded = 0;
  std::uint64_t offloaded_correct = 0;
  std::uint64_t local_correct = 0;

  std::uint64_t correct() const noexcept { return offloaded_correct + local_correct; }
};

OutcomeCounts tally(std::span<const EvalOutcome> outcomes) noexcept;

double offloaded_accuracy(std::span<const EvalOutcome> outcomes);
double overall_accuracy(std::span<const EvalOutcome> outcomes);

/// Fraction of the Gh x Gw coarse cells holding at least one selected unit.
double coverage(std::span<const PatchIndex> selection, std::uint32_t height, std::uint32_t width,
                std::uint32_t coarse_h = 7, std::uint32_t coarse_w = 7);

/// Shannon entropy divided by ln N; 0 for one-hot (and for N = 1), 1 for uniform.
double attention_entropy_norm(std::span<const double> attention);

/// Fraction of records whose cumulative-threshold count exceeds the budget.
double exceed_rate(std::span<const EvidenceRecord> records, double theta, std::uint32_t budget);
double exceed_rate(std::span<const EvidenceRecord* const> records, double theta, std::uint32_t budget);

/// offload_rate * B / N.
double avg_cost(double offload_rate, std::uint32_t budget, std::uint32_t units);

double pearson(std::span<const double> xs, std::span<const double> ys);

struct TertileSample {
  std::uint64_t id = 0;
  double entropy = 0.0;
  bool correct_a = false;
  bool correct_b = false;
};

/// Accuracy gain 100 * (acc_B - acc_A) within the low, middle and high
/// entropy tertiles. Sorted by (entropy, id); cuts at floor(n/3), floor(2n/3).
std::array<double, 3> tertile_gains(std::span<const TertileSample> samples);

struct SwapSample {
  std::vector<PatchIndex> reference;  // e.g. Attention Prefix
  std::vector<PatchIndex> candidate;  // e.g. SAGE
  const std::vector<double>* server_attention = nullptr;
  bool correct_reference = false;
  bool correct_candidate = false;
};

struct SwapReport {
  double swap_ratio = 0.0;
  double mean_server_attention_added = 0.0;
  double mean_server_attention_dropped = 0.0;
  double better_fraction = 0.0;
  double delta_accuracy_pp = 0.0;
  std::size_t images = 0;
  std::size_t excluded = 0;  // images with an empty added or dropped set
};

SwapReport swap_analysis(std::span<const SwapSample> samples, std::uint32_t budget);

/// Mean, sample standard deviation, and one-sided lower confidence bound on the mean.
struct MeanBound {
  double mean = 0.0;
  double stddev = 0.0;
  double lower = 0.0;
};
MeanBound one_sided_lower_bound(std::span<const double> values, double confidence);

/// P(X >= successes) for X ~ Binomial(trials, 1/2).
double sign_test_p_value(std::size_t successes, std::size_t trials);

}  // namespace sage
