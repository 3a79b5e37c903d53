#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sage/error.hpp"
#include "sage/metrics.hpp"

using namespace sage;

namespace {

EvalOutcome out(bool offloaded, bool correct) {
  EvalOutcome o;
  o.offloaded = offloaded;
  o.correct = correct;
  return o;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("accuracies from counts") {
  const std::vector<EvalOutcome> o = {out(true, true), out(true, false), out(true, true), out(false, true),
                                      out(false, false)};
  CHECK(offloaded_accuracy(o) == doctest::Approx(2.0 / 3.0));
  CHECK(overall_accuracy(o) == doctest::Approx(3.0 / 5.0));
  const OutcomeCounts c = tally(o);
  CHECK(c.offloaded == 3);
  CHECK(c.local_correct == 1);
  const std::vector<EvalOutcome> local_only = {out(false, true)};
  CHECK(code_of([&] { offloaded_accuracy(local_only); }) == ErrorCode::EmptySet);
  CHECK(code_of([&] { overall_accuracy({}); }) == ErrorCode::EmptySet);
}

TEST_CASE("7x7 coverage") {
  std::vector<PatchIndex> all(196);
  std::iota(all.begin(), all.end(), 0u);
  CHECK(coverage(all, 14, 14) == 1.0);
  CHECK(coverage(std::vector<PatchIndex>{0, 1, 14, 15}, 14, 14) == doctest::Approx(1.0 / 49.0));
  CHECK(coverage(std::vector<PatchIndex>{0, 2}, 14, 14) == doctest::Approx(2.0 / 49.0));
  CHECK(coverage(std::vector<PatchIndex>{}, 14, 14) == 0.0);
  CHECK(code_of([&] { coverage(std::vector<PatchIndex>{196}, 14, 14); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("normalized attention entropy") {
  CHECK(attention_entropy_norm(std::vector<double>(196, 1.0 / 196)) == doctest::Approx(1.0));
  std::vector<double> one_hot(196, 0.0);
  one_hot[3] = 1.0;
  CHECK(attention_entropy_norm(one_hot) == 0.0);
  CHECK(attention_entropy_norm(std::vector<double>{0.5, 0.5, 0.0, 0.0}) == doctest::Approx(0.5));
  CHECK(attention_entropy_norm(std::vector<double>{1.0}) == 0.0);
  CHECK(code_of([&] { attention_entropy_norm(std::vector<double>{-0.1, 1.1}); }) == ErrorCode::DomainError);
}

TEST_CASE("exceed rate") {
  EvidenceRecord flat;
  flat.attention.assign(196, 1.0 / 196);
  EvidenceRecord peaked;
  peaked.attention.assign(196, 0.0);
  peaked.attention[0] = 1.0;
  const std::vector<EvidenceRecord> rs = {flat, flat, peaked, peaked};
  for (std::uint32_t b : {32u, 64u, 96u}) CHECK(exceed_rate(rs, 0.95, b) == 0.5);
  CHECK(exceed_rate(rs, 0.95, 187) == 0.0);
  CHECK(exceed_rate(rs, 0.95, 186) == 0.5);
  CHECK(code_of([&] { exceed_rate(std::vector<EvidenceRecord>{}, 0.95, 8); }) == ErrorCode::EmptySet);
}

TEST_CASE("average communication cost") {
  CHECK(std::abs(avg_cost(0.357, 96, 196) - 0.174857142857142857) <= 1e-9);
  CHECK(avg_cost(1.0, 196, 196) == 1.0);
  CHECK(avg_cost(0.0, 32, 196) == 0.0);
  CHECK(code_of([&] { avg_cost(1.2, 32, 196); }) == ErrorCode::DomainError);
  CHECK(code_of([&] { avg_cost(0.5, 0, 196); }) == ErrorCode::DomainError);
  CHECK(code_of([&] { avg_cost(0.5, 197, 196); }) == ErrorCode::DomainError);
}

TEST_CASE("pearson correlation") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 4, 6, 8, 10};
  const std::vector<double> z = {5, 4, 3, 2, 1};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
  // Hand value: sxy = 4, sxx = syy = 5.
  CHECK(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) == doctest::Approx(0.8));
  CHECK(code_of([&] { pearson(x, std::vector<double>(5, 1.0)); }) == ErrorCode::DegenerateInput);
  CHECK(code_of([&] { pearson(std::vector<double>{1}, std::vector<double>{1}); }) == ErrorCode::DegenerateInput);
}

TEST_CASE("entropy tertile gains") {
  std::vector<TertileSample> s;
  // 9 samples: low tertile no gain, middle +1 of 3, high +3 of 3.
  for (int i = 0; i < 9; ++i) {
    TertileSample t;
    t.id = static_cast<std::uint64_t>(i);
    t.entropy = i / 10.0;
    t.correct_a = i < 3;
    t.correct_b = i < 3 || i == 4 || i >= 6;
    s.push_back(t);
  }
  std::reverse(s.begin(), s.end());
  const auto g = tertile_gains(s);
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(100.0 / 3.0));
  CHECK(g[2] == doctest::Approx(100.0));
  CHECK(code_of([&] { tertile_gains(std::vector<TertileSample>(2)); }) == ErrorCode::EmptySet);
}

TEST_CASE("swap analysis") {
  const std::vector<double> sa = {0.4, 0.1, 0.3, 0.2};
  std::vector<SwapSample> s(2);
  s[0].reference = {0, 1};
  s[0].candidate = {0, 2};  // adds 2 (0.3), drops 1 (0.1)
  s[0].server_attention = &sa;
  s[0].correct_reference = false;
  s[0].correct_candidate = true;
  s[1].reference = {0, 3};
  s[1].candidate = {3, 0};  // same set: excluded from the means
  s[1].server_attention = &sa;
  s[1].correct_reference = true;
  s[1].correct_candidate = true;
  const SwapReport r = swap_analysis(s, 2);
  CHECK(r.images == 2);
  CHECK(r.excluded == 1);
  CHECK(r.swap_ratio == doctest::Approx(0.25));
  CHECK(r.mean_server_attention_added == doctest::Approx(0.3));
  CHECK(r.mean_server_attention_dropped == doctest::Approx(0.1));
  CHECK(r.better_fraction == 1.0);
  CHECK(r.delta_accuracy_pp == doctest::Approx(50.0));
  s[0].server_attention = nullptr;
  CHECK(code_of([&] { swap_analysis(s, 2); }) == ErrorCode::MissingServerAttention);
}

TEST_CASE("confidence helpers") {
  // t_{0.95, 4} = 2.131847
  const MeanBound b = one_sided_lower_bound(std::vector<double>{1, 2, 3, 4, 5}, 0.95);
  CHECK(b.mean == 3.0);
  CHECK(b.stddev == doctest::Approx(std::sqrt(2.5)));
  CHECK(b.lower == doctest::Approx(3.0 - 2.131847 * std::sqrt(2.5) / std::sqrt(5.0)).epsilon(1e-6));
  CHECK(sign_test_p_value(20, 20) == doctest::Approx(std::pow(0.5, 20)));
  CHECK(sign_test_p_value(15, 20) == doctest::Approx(0.020694).epsilon(1e-4));
  CHECK(sign_test_p_value(14, 20) == doctest::Approx(0.057659).epsilon(1e-4));
  CHECK(sign_test_p_value(0, 7) == doctest::Approx(1.0));
}
