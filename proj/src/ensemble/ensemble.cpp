#include "octbio/ensemble/ensemble.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "octbio/core/error.hpp"

namespace octbio::ensemble {

std::string to_string(Source s) { return s == Source::MODEL_A ? "MODEL_A" : "MODEL_B"; }

RoutingTable RoutingTable::defaults() {
  RoutingTable t;
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
    t.source[j] = kBiomarkers[j].locality == Locality::GLOBAL ? Source::MODEL_B : Source::MODEL_A;
  }
  return t;
}

RoutingTable RoutingTable::all(Source s) {
  RoutingTable t;
  t.source.fill(s);
  return t;
}

RoutingTable RoutingTable::with_overrides(const std::string& spec) const {
  RoutingTable t = *this;
  std::istringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ContractError("routing override '" + item + "' is not CODE=MODEL_A|MODEL_B");
    const auto code = item.substr(0, eq), value = item.substr(eq + 1);
    const auto b = parse_biomarker(code);
    if (!b) throw ContractError("routing override names unknown biomarker '" + code + "'");
    if (value == "MODEL_A" || value == "A") {
      t.source[index_of(*b)] = Source::MODEL_A;
    } else if (value == "MODEL_B" || value == "B") {
      t.source[index_of(*b)] = Source::MODEL_B;
    } else {
      throw ContractError("routing override for " + code + " must be MODEL_A or MODEL_B");
    }
  }
  return t;
}

std::string RoutingTable::describe() const {
  std::string s;
  for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
    s += (j ? "," : "") + std::string(kBiomarkers[j].code) + "=" + to_string(source[j]);
  }
  return s;
}

std::string to_string(Scheme s) { return s == Scheme::AVERAGE ? "average" : "route"; }

Scheme parse_scheme(const std::string& text) {
  if (text == "average") return Scheme::AVERAGE;
  if (text == "route") return Scheme::ROUTE;
  throw ContractError("unknown ensemble scheme '" + text + "' (expected average or route)");
}

namespace {

// Row index into b for every row of a.
std::vector<std::size_t> align(const PredictionMatrix& a, const PredictionMatrix& b) {
  std::map<std::string, std::size_t> in_b;
  for (std::size_t i = 0; i < b.size(); ++i) in_b[b.image_ids[i]] = i;
  std::set<std::string> in_a(a.image_ids.begin(), a.image_ids.end());
  std::vector<std::string> only_a, only_b;
  for (const auto& id : a.image_ids) {
    if (!in_b.count(id)) only_a.push_back(id);
  }
  for (const auto& id : b.image_ids) {
    if (!in_a.count(id)) only_b.push_back(id);
  }
  if (!only_a.empty() || !only_b.empty() || a.size() != b.size()) {
    std::string msg = "prediction matrices cover different images;";
    msg += " only in A:";
    for (const auto& id : only_a) msg += " " + id;
    msg += "; only in B:";
    for (const auto& id : only_b) msg += " " + id;
    throw ContractError(msg);
  }
  std::vector<std::size_t> idx;
  idx.reserve(a.size());
  for (const auto& id : a.image_ids) idx.push_back(in_b.at(id));
  return idx;
}

PredictionMatrix combine(const PredictionMatrix& a, const PredictionMatrix& b, std::string source, auto&& cell) {
  const auto idx = align(a, b);
  PredictionMatrix out;
  out.image_ids = a.image_ids;
  out.source = std::move(source);
  out.probabilities.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
      out.probabilities[i][j] = cell(a.probabilities[i][j], b.probabilities[idx[i]][j], j);
    }
  }
  return out;
}

}  // namespace

PredictionMatrix average_ensemble(const PredictionMatrix& a, const PredictionMatrix& b, double weight_a) {
  if (!(weight_a >= 0.0 && weight_a <= 1.0)) throw ContractError("ensemble weight must lie in [0, 1]");
  std::ostringstream src;
  src << "average(weight_a=" << weight_a << "; a=" << a.source << "; b=" << b.source << ")";
  return combine(a, b, src.str(), [&](double pa, double pb, std::size_t) {
    // Rounding can push a convex combination an ulp outside [min, max].
    return std::clamp(weight_a * pa + (1.0 - weight_a) * pb, std::min(pa, pb), std::max(pa, pb));
  });
}

PredictionMatrix route_ensemble(const PredictionMatrix& a, const PredictionMatrix& b, const RoutingTable& routing) {
  return combine(a, b, "route(" + routing.describe() + "; a=" + a.source + "; b=" + b.source + ")",
                 [&](double pa, double pb, std::size_t j) { return routing.source[j] == Source::MODEL_A ? pa : pb; });
}

PredictionMatrix binarize(const PredictionMatrix& p, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("threshold must lie in (0, 1)");
  PredictionMatrix out = p;
  metrics::BitMatrix d(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) d[i][j] = p.probabilities[i][j] >= threshold ? 1 : 0;
  }
  out.decisions = std::move(d);
  out.threshold = threshold;
  return out;
}

}  // namespace octbio::ensemble
