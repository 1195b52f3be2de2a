#include "octbio/core/biomarker.hpp"

namespace octbio {

std::optional<Biomarker> parse_biomarker(std::string_view code) {
  for (const auto& b : kBiomarkers) {
    if (b.code == code || b.display_name == code) return b.id;
  }
  return std::nullopt;
}

std::string_view to_string(Locality l) {
  switch (l) {
    case Locality::LOCAL: return "LOCAL";
    case Locality::GLOBAL: return "GLOBAL";
    case Locality::INTERMEDIATE: return "INTERMEDIATE";
  }
  return "?";
}

std::string_view type_tag(Locality l) {
  switch (l) {
    case Locality::LOCAL: return "L";
    case Locality::GLOBAL: return "G";
    case Locality::INTERMEDIATE: return "L/G";
  }
  return "?";
}

}  // namespace octbio
