#include "octbio/core/dataset.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "octbio/core/error.hpp"

namespace octbio {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(SplitTag s) {
  switch (s) {
    case SplitTag::TRAIN: return "TRAIN";
    case SplitTag::TEST_PHASE1: return "TEST_PHASE1";
    case SplitTag::TEST_PHASE2: return "TEST_PHASE2";
  }
  return "?";
}

SplitTag parse_split_tag(std::string_view s) {
  if (s == "TRAIN") return SplitTag::TRAIN;
  if (s == "TEST_PHASE1") return SplitTag::TEST_PHASE1;
  if (s == "TEST_PHASE2") return SplitTag::TEST_PHASE2;
  throw ContractError("unknown split tag '" + std::string(s) + "'");
}

Dataset::Dataset(std::vector<ImageRecord> records, SplitTag split, fs::path root, bool unlabeled)
    : records_(std::move(records)), split_(split), root_(std::move(root)), unlabeled_(unlabeled) {
  for (const auto& r : records_) patients_.insert(r.patient_id);
}

fs::path Dataset::resolve(const ImageRecord& r) const {
  if (r.image_path.is_absolute() || root_.empty()) return r.image_path;
  return root_ / r.image_path;
}

std::optional<std::size_t> Dataset::find(std::string_view image_id) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].image_id == image_id) return i;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> duplicate_violations(const Dataset& ds) {
  std::map<std::string, std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < ds.size(); ++i) seen[ds.records()[i].image_id].push_back(i);
  std::vector<std::string> out;
  for (const auto& [id, idx] : seen) {
    if (idx.size() < 2) continue;
    std::ostringstream os;
    os << "duplicate image_id '" << id << "' at records";
    for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? ", " : " ") << idx[k];
    out.push_back(os.str());
  }
  return out;
}

std::string record_tag(std::size_t i, const ImageRecord& r) {
  return "record " + std::to_string(i) + " ('" + r.image_id + "')";
}

std::vector<std::string> record_violations(const Dataset& ds) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records()[i];
    if (r.image_id.empty()) out.push_back(record_tag(i, r) + ": empty image_id");
    if (r.patient_id.empty()) out.push_back(record_tag(i, r) + ": empty patient_id");
    if (r.week < 0) out.push_back(record_tag(i, r) + ": negative week " + std::to_string(r.week));
    if (r.labels.size() != kNumBiomarkers) {
      out.push_back(record_tag(i, r) + ": label length " + std::to_string(r.labels.size()) + ", expected 6");
      continue;
    }
    for (std::size_t j = 0; j < r.labels.size(); ++j) {
      const auto v = r.labels[j];
      if (v == kUnknownLabel) {
        if (!ds.unlabeled()) {
          out.push_back(record_tag(i, r) + ": UNKNOWN label for " +
                        std::string(kBiomarkers[j].code) + " in a labeled dataset");
        }
      } else if (v != 0 && v != 1) {
        out.push_back(record_tag(i, r) + ": label " + std::to_string(v) + " for " +
                      std::string(kBiomarkers[j].code) + " is not 0/1");
      }
    }
  }
  return out;
}

std::vector<std::string> missing_images(const Dataset& ds) {
  std::vector<std::string> out;
  for (const auto& r : ds.records()) {
    const fs::path p = ds.resolve(r);
    std::ifstream probe(p, std::ios::binary);
    if (!probe) out.push_back(p.string());
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_dataset(const Dataset& ds) {
  auto out = duplicate_violations(ds);
  auto rec = record_violations(ds);
  out.insert(out.end(), rec.begin(), rec.end());
  for (const auto& p : missing_images(ds)) out.push_back("image not readable: " + p);
  return out;
}

namespace {

ImageRecord parse_record(const std::string& line, const std::string& where, std::size_t line_no) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(where, line_no, "record is not a JSON object");
  const std::string ctx = j.contains("image_id") && j["image_id"].is_string()
                              ? " (image_id '" + j["image_id"].get<std::string>() + "')"
                              : "";
  auto need = [&](const char* key) -> const ojson& {
    if (!j.contains(key)) throw ParseError(where, line_no, std::string("missing key '") + key + "'" + ctx);
    return j[key];
  };
  auto bad = [&](const char* key, const char* expected) {
    return ParseError(where, line_no, std::string("key '") + key + "' must be " + expected + ctx);
  };

  ImageRecord r;
  const auto& id = need("image_id");
  if (!id.is_string()) throw bad("image_id", "a string");
  r.image_id = id.get<std::string>();
  const auto& pid = need("patient_id");
  if (!pid.is_string()) throw bad("patient_id", "a string");
  r.patient_id = pid.get<std::string>();
  const auto& week = need("week");
  if (!week.is_number_integer()) throw bad("week", "an integer");
  r.week = week.get<int>();
  const auto& path = need("image_path");
  if (!path.is_string()) throw bad("image_path", "a string");
  r.image_path = path.get<std::string>();

  const auto& labels = need("labels");
  if (!labels.is_array()) throw bad("labels", "an array");
  for (const auto& v : labels) {
    if (v.is_null()) {
      r.labels.push_back(kUnknownLabel);
    } else if (v.is_number_integer()) {
      r.labels.push_back(static_cast<std::int8_t>(v.get<int>()));
    } else {
      throw bad("labels", "an array of 0/1/null");
    }
  }

  if (j.contains("clinical") && !j["clinical"].is_null()) {
    const auto& c = j["clinical"];
    if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
      throw bad("clinical", "null or an array of 2 numbers");
    }
    r.clinical = std::array<double, 2>{c[0].get<double>(), c[1].get<double>()};
  }
  return r;
}

}  // namespace

std::string manifest_line(const ImageRecord& r) {
  ojson j;
  j["image_id"] = r.image_id;
  j["patient_id"] = r.patient_id;
  j["week"] = r.week;
  j["image_path"] = r.image_path.generic_string();
  ojson labels = ojson::array();
  for (auto v : r.labels) {
    if (v == kUnknownLabel) {
      labels.push_back(nullptr);
    } else {
      labels.push_back(static_cast<int>(v));
    }
  }
  j["labels"] = labels;
  if (r.clinical) {
    j["clinical"] = {(*r.clinical)[0], (*r.clinical)[1]};
  } else {
    j["clinical"] = nullptr;
  }
  return j.dump();
}

Dataset load_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ImageRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_record(line, path.string(), line_no));
  }
  Dataset ds(std::move(records), options.split, path.parent_path(), options.unlabeled);

  if (auto dup = duplicate_violations(ds); !dup.empty()) {
    throw ValidationError("manifest " + path.string() + " has duplicate image ids", dup);
  }
  if (auto rec = record_violations(ds); !rec.empty()) {
    throw ValidationError("manifest " + path.string() + " has invalid records", rec);
  }
  if (options.check_images) {
    if (auto missing = missing_images(ds); !missing.empty()) {
      throw ValidationError("manifest " + path.string() + " references missing images", missing);
    }
  }
  return ds;
}

void write_manifest(const Dataset& ds, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : ds.records()) out << manifest_line(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<GrayImage> load_images(const Dataset& ds) {
  std::vector<GrayImage> images;
  images.reserve(ds.size());
  for (const auto& r : ds.records()) images.push_back(read_png(ds.resolve(r)));
  return images;
}

}  // namespace octbio
