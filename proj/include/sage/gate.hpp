#pragma once

#include "sage/evidence.hpp"

namespace sage {

struct GateDecision {
  double uncertainty = 0.0;  // bits
  bool offload = false;
};

/// Min-entropy of the edge prediction: -log2(max_c p(c|x)).
double uncertainty(double local_max_prob);

/// Offloads when uncertainty >= eta (boundary inclusive).
GateDecision gate(const EvidenceRecord& record, double eta);

}  // namespace sage
