#include "sage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "sage/error.hpp"

namespace sage {

OutcomeCounts tally(std::span<const EvalOutcome> outcomes) noexcept {
  OutcomeCounts c;
  for (const EvalOutcome& o : outcomes) {
    ++c.total;
    if (o.offloaded) {
      ++c.offloaded;
      if (o.correct) ++c.offloaded_correct;
    } else if (o.correct) {
      ++c.local_correct;
    }
  }
  return c;
}

double offloaded_accuracy(std::span<const EvalOutcome> outcomes) {
  const OutcomeCounts c = tally(outcomes);
  if (c.offloaded == 0) throw Error(ErrorCode::EmptySet, "no offloaded outcomes");
  return static_cast<double>(c.offloaded_correct) / static_cast<double>(c.offloaded);
}

double overall_accuracy(std::span<const EvalOutcome> outcomes) {
  const OutcomeCounts c = tally(outcomes);
  if (c.total == 0) throw Error(ErrorCode::EmptySet, "no outcomes");
  return static_cast<double>(c.correct()) / static_cast<double>(c.total);
}

double coverage(std::span<const PatchIndex> selection, std::uint32_t height, std::uint32_t width,
                std::uint32_t coarse_h, std::uint32_t coarse_w) {
  if (height == 0 || width == 0 || coarse_h == 0 || coarse_w == 0 || coarse_h > height || coarse_w > width) {
    throw Error(ErrorCode::ShapeMismatch, "coarse grid must be non-empty and no finer than the patch grid");
  }
  const std::uint64_t n = static_cast<std::uint64_t>(height) * width;
  std::vector<bool> hit(static_cast<std::size_t>(coarse_h) * coarse_w, false);
  std::size_t distinct = 0;
  for (PatchIndex i : selection) {
    if (i >= n) throw Error(ErrorCode::ShapeMismatch, "selection index outside the grid");
    const std::uint64_t row = i / width;
    const std::uint64_t col = i % width;
    const std::size_t cell = static_cast<std::size_t>((row * coarse_h / height) * coarse_w + col * coarse_w / width);
    if (!hit[cell]) {
      hit[cell] = true;
      ++distinct;
    }
  }
  return static_cast<double>(distinct) / static_cast<double>(hit.size());
}

double attention_entropy_norm(std::span<const double> attention) {
  if (attention.empty()) throw Error(ErrorCode::DomainError, "attention is empty");
  double total = 0.0;
  for (double p : attention) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::DomainError, "attention entries must be >= 0");
    total += p;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DomainError, "attention has zero mass");
  if (attention.size() == 1) return 0.0;
  double h = 0.0;
  for (double p : attention) {
    if (p > 0.0) {
      const double q = p / total;
      h -= q * std::log(q);
    }
  }
  return std::clamp(h / std::log(static_cast<double>(attention.size())), 0.0, 1.0);
}

double exceed_rate(std::span<const EvidenceRecord* const> records, double theta, std::uint32_t budget) {
  if (records.empty()) throw Error(ErrorCode::EmptySet, "no records");
  std::size_t exceeding = 0;
  for (const EvidenceRecord* r : records) {
    if (cumulative_threshold(r->attention, theta).count > budget) ++exceeding;
  }
  return static_cast<double>(exceeding) / static_cast<double>(records.size());
}

double exceed_rate(std::span<const EvidenceRecord> records, double theta, std::uint32_t budget) {
  std::vector<const EvidenceRecord*> ptrs;
  ptrs.reserve(records.size());
  for (const EvidenceRecord& r : records) ptrs.push_back(&r);
  return exceed_rate(std::span<const EvidenceRecord* const>(ptrs), theta, budget);
}

double avg_cost(double offload_rate, std::uint32_t budget, std::uint32_t units) {
  if (!(offload_rate >= 0.0 && offload_rate <= 1.0)) throw Error(ErrorCode::DomainError, "offload rate outside [0, 1]");
  if (budget < 1 || budget > units) throw Error(ErrorCode::DomainError, "budget must lie in [1, N]");
  return offload_rate * static_cast<double>(budget) / static_cast<double>(units);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "pearson needs two equal-length series of length >= 2");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::array<double, 3> tertile_gains(std::span<const TertileSample> samples) {
  if (samples.size() < 3) throw Error(ErrorCode::EmptySet, "tertiles need at least 3 samples");
  std::vector<TertileSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), [](const TertileSample& a, const TertileSample& b) {
    return a.entropy != b.entropy ? a.entropy < b.entropy : a.id < b.id;
  });
  const std::size_t n = sorted.size();
  const std::array<std::size_t, 4> cut = {0, n / 3, 2 * n / 3, n};
  std::array<double, 3> gains{};
  for (std::size_t t = 0; t < 3; ++t) {
    long long a = 0;
    long long b = 0;
    for (std::size_t i = cut[t]; i < cut[t + 1]; ++i) {
      a += sorted[i].correct_a ? 1 : 0;
      b += sorted[i].correct_b ? 1 : 0;
    }
    gains[t] = 100.0 * static_cast<double>(b - a) / static_cast<double>(cut[t + 1] - cut[t]);
  }
  return gains;
}

SwapReport swap_analysis(std::span<const SwapSample> samples, std::uint32_t budget) {
  if (samples.empty()) throw Error(ErrorCode::EmptySet, "no images");
  if (budget == 0) throw Error(ErrorCode::InvalidBudget, "budget must be >= 1");
  SwapReport rep;
  rep.images = samples.size();
  double ratio_sum = 0.0;
  double added_sum = 0.0;
  double dropped_sum = 0.0;
  std::size_t included = 0;
  std::size_t better = 0;
  long long correct_ref = 0;
  long long correct_new = 0;
  for (const SwapSample& s : samples) {
    if (s.server_attention == nullptr) throw Error(ErrorCode::MissingServerAttention, "server attention required");
    const std::vector<double>& sa = *s.server_attention;
    const std::set<PatchIndex> ref(s.reference.begin(), s.reference.end());
    const std::set<PatchIndex> cand(s.candidate.begin(), s.candidate.end());
    double added = 0.0;
    double dropped = 0.0;
    std::size_t n_added = 0;
    std::size_t n_dropped = 0;
    for (PatchIndex i : cand) {
      if (i >= sa.size()) throw Error(ErrorCode::ShapeMismatch, "selection index outside server attention");
      if (!ref.contains(i)) {
        added += sa[i];
        ++n_added;
      }
    }
    for (PatchIndex i : ref) {
      if (i >= sa.size()) throw Error(ErrorCode::ShapeMismatch, "selection index outside server attention");
      if (!cand.contains(i)) {
        dropped += sa[i];
        ++n_dropped;
      }
    }
    ratio_sum += static_cast<double>(n_added) / static_cast<double>(budget);
    correct_ref += s.correct_reference ? 1 : 0;
    correct_new += s.correct_candidate ? 1 : 0;
    if (n_added == 0 || n_dropped == 0) {
      ++rep.excluded;
      continue;
    }
    const double mean_added = added / static_cast<double>(n_added);
    const double mean_dropped = dropped / static_cast<double>(n_dropped);
    added_sum += mean_added;
    dropped_sum += mean_dropped;
    if (mean_added > mean_dropped) ++better;
    ++included;
  }
  const double images = static_cast<double>(samples.size());
  rep.swap_ratio = ratio_sum / images;
  if (included > 0) {
    rep.mean_server_attention_added = added_sum / static_cast<double>(included);
    rep.mean_server_attention_dropped = dropped_sum / static_cast<double>(included);
    rep.better_fraction = static_cast<double>(better) / static_cast<double>(included);
  }
  rep.delta_accuracy_pp = 100.0 * static_cast<double>(correct_new - correct_ref) / images;
  return rep;
}

MeanBound one_sided_lower_bound(std::span<const double> values, double confidence) {
  if (values.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least two values");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorCode::DomainError, "confidence must lie in (0, 1)");
  const double n = static_cast<double>(values.size());
  MeanBound b;
  for (double v : values) b.mean += v;
  b.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - b.mean) * (v - b.mean);
  b.stddev = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, confidence);
  b.lower = b.mean - t * b.stddev / std::sqrt(n);
  return b;
}

double sign_test_p_value(std::size_t successes, std::size_t trials) {
  if (successes > trials) throw Error(ErrorCode::DomainError, "successes exceed trials");
  // Sum C(n, k) / 2^n for k >= successes, in log space to stay finite.
  double p = 0.0;
  for (std::size_t k = successes; k <= trials; ++k) {
    const double log_c = std::lgamma(static_cast<double>(trials) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                         std::lgamma(static_cast<double>(trials - k) + 1.0);
    p += std::exp(log_c - static_cast<double>(trials) * std::log(2.0));
  }
  return std::min(p, 1.0);
}

}  // namespace sage
