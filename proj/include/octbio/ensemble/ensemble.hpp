#pragma once

#include <array>
#include <string>

#include "octbio/ensemble/prediction.hpp"

namespace octbio::ensemble {

enum class Source { MODEL_A, MODEL_B };
std::string to_string(Source s);

struct RoutingTable {
  std::array<Source, kNumBiomarkers> source{};

  // LOCAL and INTERMEDIATE -> MODEL_A (local attention), GLOBAL -> MODEL_B.
  static RoutingTable defaults();
  static RoutingTable all(Source s);
  // Applies "CODE=MODEL_A,CODE=MODEL_B" overrides on top of this table.
  RoutingTable with_overrides(const std::string& spec) const;
  std::string describe() const;
};

enum class Scheme { AVERAGE, ROUTE };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& text);

// weight_a * a + (1 - weight_a) * b per cell, rows aligned to a's order.
PredictionMatrix average_ensemble(const PredictionMatrix& a, const PredictionMatrix& b, double weight_a = 0.5);
// Column j copied from the routed source.
PredictionMatrix route_ensemble(const PredictionMatrix& a, const PredictionMatrix& b,
                                const RoutingTable& routing = RoutingTable::defaults());
// decision = 1 iff probability >= threshold.
PredictionMatrix binarize(const PredictionMatrix& p, double threshold = 0.5);

}  // namespace octbio::ensemble
