#include "sage/gate.hpp"

#include <cmath>

#include "sage/error.hpp"

namespace sage {

double uncertainty(double local_max_prob) {
  if (!std::isfinite(local_max_prob) || local_max_prob <= 0.0 || local_max_prob > 1.0) {
    throw Error(ErrorCode::DomainError, "max probability must lie in (0, 1]");
  }
  return local_max_prob == 1.0 ? 0.0 : -std::log2(local_max_prob);
}

GateDecision gate(const EvidenceRecord& record, double eta) {
  if (!std::isfinite(eta) || eta < 0.0) throw Error(ErrorCode::DomainError, "eta must be finite and >= 0");
  GateDecision d;
  d.uncertainty = uncertainty(record.local_max_prob);
  d.offload = d.uncertainty >= eta;
  return d;
}

}  // namespace sage
