#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace octbio {

enum class Biomarker : std::uint8_t { IRHRF, PAVF, FAVF, IRF, DRT_DME, VD };

enum class Locality : std::uint8_t { LOCAL, GLOBAL, INTERMEDIATE };

inline constexpr std::size_t kNumBiomarkers = 6;

struct BiomarkerInfo {
  Biomarker id;
  std::string_view code;          // column/key name, e.g. "DRT_DME"
  std::string_view display_name;  // table name, e.g. "DRT/DME"
  std::string_view long_name;
  Locality locality;
};

// Fixed order; the index of an entry is the label-vector position.
inline constexpr std::array<BiomarkerInfo, kNumBiomarkers> kBiomarkers{{
    {Biomarker::IRHRF, "IRHRF", "IRHRF", "Intraretinal Hyperreflective Foci", Locality::LOCAL},
    {Biomarker::PAVF, "PAVF", "PAVF", "Partially Attached Vitreous Face", Locality::GLOBAL},
    {Biomarker::FAVF, "FAVF", "FAVF", "Fully Attached Vitreous Face", Locality::GLOBAL},
    {Biomarker::IRF, "IRF", "IRF", "Intraretinal Fluid", Locality::LOCAL},
    {Biomarker::DRT_DME, "DRT_DME", "DRT/DME", "Diffuse Retinal Thickening / Diabetic Macular Edema",
     Locality::INTERMEDIATE},
    {Biomarker::VD, "VD", "VD", "Vitreous Debris", Locality::GLOBAL},
}};

constexpr std::size_t index_of(Biomarker b) { return static_cast<std::size_t>(b); }
constexpr const BiomarkerInfo& info(Biomarker b) { return kBiomarkers[index_of(b)]; }
constexpr std::string_view code_of(Biomarker b) { return info(b).code; }
constexpr Locality locality_of(Biomarker b) { return info(b).locality; }

std::optional<Biomarker> parse_biomarker(std::string_view code);
std::string_view to_string(Locality l);
// "L", "G" or "L/G", the type column of the comparison tables.
std::string_view type_tag(Locality l);

}  // namespace octbio
