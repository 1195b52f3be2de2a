#include "octbio/ensemble/prediction.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "octbio/core/error.hpp"

namespace octbio::ensemble {

using ojson = nlohmann::ordered_json;

std::optional<std::size_t> PredictionMatrix::row_of(const std::string& image_id) const {
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (image_ids[i] == image_id) return i;
  }
  return std::nullopt;
}

std::vector<std::string> PredictionMatrix::check_invariants() const {
  std::vector<std::string> v;
  if (probabilities.size() != image_ids.size()) {
    v.push_back(std::to_string(probabilities.size()) + " probability rows for " + std::to_string(image_ids.size()) +
                " image ids");
    return v;
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    if (!seen.insert(image_ids[i]).second) v.push_back("duplicate image_id " + image_ids[i]);
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
      const double p = probabilities[i][j];
      if (!(p >= 0.0 && p <= 1.0)) {
        v.push_back(image_ids[i] + " " + std::string(kBiomarkers[j].code) + " probability " + std::to_string(p) +
                    " outside [0, 1]");
      }
    }
  }
  if (decisions.has_value() != threshold.has_value()) v.push_back("decisions and threshold must be set together");
  if (decisions) {
    if (decisions->size() != image_ids.size()) {
      v.push_back("decision rows do not match image ids");
    } else {
      for (std::size_t i = 0; i < image_ids.size(); ++i) {
        for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
          const int expected = probabilities[i][j] >= *threshold ? 1 : 0;
          if ((*decisions)[i][j] != expected) {
            v.push_back(image_ids[i] + " " + std::string(kBiomarkers[j].code) +
                        " decision disagrees with the recorded threshold");
          }
        }
      }
    }
  }
  return v;
}

std::string biomarker_header() {
  std::string h;
  for (const auto& b : kBiomarkers) h += "," + std::string(b.code);
  return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::filesystem::path decisions_path(const std::filesystem::path& predictions) {
  auto p = predictions;
  p.replace_extension();
  return p.string() + ".decisions.csv";
}

std::filesystem::path meta_path(const std::filesystem::path& artifact) { return artifact.string() + ".meta.json"; }

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& p, const std::string& header) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::string line;
  if (!std::getline(in, line) || line != header) throw ParseError(p.string(), 1, "expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 1 + kNumBiomarkers) {
      throw ParseError(p.string(), n, "expected " + std::to_string(1 + kNumBiomarkers) + " fields");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_double(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(p.string(), line, "not a number: '" + s + "'");
  }
}

}  // namespace

void write_predictions(const PredictionMatrix& pm, const std::filesystem::path& path, const ojson& extra) {
  if (auto v = pm.check_invariants(); !v.empty()) throw ValidationError("refusing to write invalid predictions", v);
  {
    auto out = open_out(path);
    out << "image_id" << biomarker_header() << '\n';
    for (std::size_t i = 0; i < pm.size(); ++i) {
      out << pm.image_ids[i];
      for (double p : pm.probabilities[i]) out << ',' << exact(p);
      out << '\n';
    }
  }
  if (pm.decisions) {
    auto out = open_out(decisions_path(path));
    out << "image_id" << biomarker_header() << '\n';
    for (std::size_t i = 0; i < pm.size(); ++i) {
      out << pm.image_ids[i];
      for (auto d : (*pm.decisions)[i]) out << ',' << static_cast<int>(d);
      out << '\n';
    }
  }
  ojson meta = {{"source", pm.source}, {"rows", pm.size()}};
  meta["threshold"] = pm.threshold ? ojson(*pm.threshold) : ojson(nullptr);
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  open_out(meta_path(path)) << meta.dump(2) << '\n';
}

PredictionMatrix read_predictions(const std::filesystem::path& path) {
  PredictionMatrix pm;
  const auto header = "image_id" + biomarker_header();
  std::size_t line = 1;
  for (const auto& row : read_table(path, header)) {
    ++line;
    pm.image_ids.push_back(row[0]);
    ProbRow p{};
    for (std::size_t j = 0; j < kNumBiomarkers; ++j) p[j] = parse_double(row[j + 1], path, line);
    pm.probabilities.push_back(p);
  }
  if (std::filesystem::exists(meta_path(path))) {
    std::ifstream in(meta_path(path));
    try {
      const auto meta = ojson::parse(in);
      pm.source = meta.value("source", "");
      if (meta.contains("threshold") && !meta["threshold"].is_null()) pm.threshold = meta["threshold"].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(meta_path(path).string(), 1, e.what());
    }
  }
  const auto dpath = decisions_path(path);
  if (std::filesystem::exists(dpath)) {
    metrics::BitMatrix d;
    const auto rows = read_table(dpath, header);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i >= pm.image_ids.size() || rows[i][0] != pm.image_ids[i]) {
        throw ValidationError("decisions file rows do not match predictions", {dpath.string()});
      }
      metrics::BitRow b{};
      for (std::size_t j = 0; j < kNumBiomarkers; ++j) {
        const auto& cell = rows[i][j + 1];
        if (cell != "0" && cell != "1") throw ParseError(dpath.string(), i + 2, "decision must be 0 or 1");
        b[j] = static_cast<std::int8_t>(cell == "1");
      }
      d.push_back(b);
    }
    pm.decisions = std::move(d);
  } else {
    pm.threshold.reset();
  }
  if (auto v = pm.check_invariants(); !v.empty()) throw ValidationError("invalid predictions in " + path.string(), v);
  return pm;
}

}  // namespace octbio::ensemble
