#include <doctest.h>

#include <cmath>
#include <limits>

#include "sage/error.hpp"
#include "sage/gate.hpp"
#include "sage/world.hpp"

using namespace sage;

namespace {

EvidenceRecord with_prob(double p) {
  EvidenceRecord r;
  r.local_max_prob = p;
  return r;
}

}  // namespace

TEST_CASE("min-entropy uncertainty") {
  CHECK(uncertainty(1.0) == 0.0);
  CHECK(uncertainty(0.5) == 1.0);
  CHECK(uncertainty(0.25) == 2.0);
  CHECK(uncertainty(0.9) == doctest::Approx(0.152003).epsilon(1e-5));
  for (double p : {0.0, -0.1, 1.5, std::nan(""), std::numeric_limits<double>::infinity()}) {
    try {
      uncertainty(p);
      FAIL("expected DomainError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DomainError);
    }
  }
}

TEST_CASE("uncertainty is strictly decreasing") {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 1000; ++i) {
    const double u = uncertainty(i / 1000.0);
    CHECK(u < prev);
    prev = u;
  }
}

TEST_CASE("gate decisions") {
  CHECK(gate(with_prob(0.5), 1.0).offload);  // u == eta offloads
  CHECK_FALSE(gate(with_prob(0.9), 1.0).offload);
  CHECK(gate(with_prob(1.0), 0.0).offload);
  CHECK(gate(with_prob(0.9), 1.0).uncertainty == doctest::Approx(-std::log2(0.9)));
  CHECK_THROWS_AS(gate(with_prob(0.5), -1.0), Error);
}

TEST_CASE("offload sets are nested as eta grows") {
  const SyntheticWorld w(WorldParams{});
  const auto corpus = w.generate_corpus(300);
  const double etas[] = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
  for (const EvidenceRecord& r : corpus) {
    bool prev = true;
    for (double e : etas) {
      const bool off = gate(r, e).offload;
      CHECK((prev || !off));
      prev = off;
    }
  }
}
