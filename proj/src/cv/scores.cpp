#include "octbio/cv/scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "octbio/core/error.hpp"

namespace octbio::cv {

namespace {

double quantize(double p) { return std::round(p * 1e6) / 1e6; }

int parse_int(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(p.string(), line, "not an integer: '" + s + "'");
}

double parse_real(const std::string& s, const std::filesystem::path& p, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(p.string(), line, "not a number: '" + s + "'");
}

}  // namespace

void ScoreStore::add(int fold, int epoch, const std::string& image_id, const ProbRow& probabilities) {
  ProbRow q{};
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (!(probabilities[j] >= 0.0 && probabilities[j] <= 1.0)) {
      throw ContractError("probability outside [0, 1] for " + image_id);
    }
    q[j] = quantize(probabilities[j]);
  }
  entries_[{fold, epoch, image_id}] = q;
}

void ScoreStore::set_val_f1(int fold, int epoch, double f1) { val_f1_[{fold, epoch}] = f1; }

std::set<std::pair<int, int>> ScoreStore::slices() const {
  std::set<std::pair<int, int>> s;
  for (const auto& [key, _] : entries_) s.emplace(std::get<0>(key), std::get<1>(key));
  return s;
}

std::set<int> ScoreStore::folds() const {
  std::set<int> s;
  for (const auto& [fold, epoch] : slices()) s.insert(fold);
  for (const auto& [key, _] : val_f1_) s.insert(key.first);
  return s;
}

ScoreStore ScoreStore::fold_fragment(int fold) const {
  ScoreStore out;
  for (const auto& [key, row] : entries_) {
    if (std::get<0>(key) == fold) out.entries_[key] = row;
  }
  for (const auto& [key, f1] : val_f1_) {
    if (key.first == fold) out.val_f1_[key] = f1;
  }
  return out;
}

void ScoreStore::merge(const ScoreStore& other) {
  for (const auto& [key, row] : other.entries_) {
    auto [it, inserted] = entries_.emplace(key, row);
    if (!inserted && it->second != row) {
      throw ContractError("conflicting scores for fold " + std::to_string(std::get<0>(key)) + " epoch " +
                          std::to_string(std::get<1>(key)) + " image " + std::get<2>(key));
    }
  }
  for (const auto& [key, f1] : other.val_f1_) {
    auto [it, inserted] = val_f1_.emplace(key, f1);
    if (!inserted && it->second != f1) {
      throw ContractError("conflicting val F1 for fold " + std::to_string(key.first) + " epoch " +
                          std::to_string(key.second));
    }
  }
}

void ScoreStore::write_csv(const std::filesystem::path& scores, const std::filesystem::path& val) const {
  {
    std::ofstream out(scores, std::ios::binary);
    if (!out) throw IoError("cannot write " + scores.string());
    out << "fold,epoch,image_id" << ensemble::biomarker_header() << '\n';
    char buf[32];
    for (const auto& [key, row] : entries_) {
      out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key);
      for (double p : row) {
        std::snprintf(buf, sizeof buf, "%.6f", p);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  std::ofstream out(val, std::ios::binary);
  if (!out) throw IoError("cannot write " + val.string());
  out << "fold,epoch,val_macro_f1\n";
  char buf[40];
  for (const auto& [key, f1] : val_f1_) {
    std::snprintf(buf, sizeof buf, "%.17g", f1);
    out << key.first << ',' << key.second << ',' << buf << '\n';
  }
}

ScoreStore ScoreStore::read_csv(const std::filesystem::path& scores, const std::filesystem::path& val) {
  ScoreStore store;
  {
    std::ifstream in(scores, std::ios::binary);
    if (!in) throw IoError("cannot open " + scores.string());
    std::string line;
    const std::string header = "fold,epoch,image_id" + ensemble::biomarker_header();
    if (!std::getline(in, line) || line != header) throw ParseError(scores.string(), 1, "expected header " + header);
    std::size_t n = 1;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      const auto cells = ensemble::split_csv_line(line);
      if (cells.size() != 9) throw ParseError(scores.string(), n, "expected 9 fields");
      ProbRow row{};
      for (std::size_t j = 0; j < 6; ++j) row[j] = parse_real(cells[3 + j], scores, n);
      store.add(parse_int(cells[0], scores, n), parse_int(cells[1], scores, n), cells[2], row);
    }
  }
  std::ifstream in(val, std::ios::binary);
  if (!in) throw IoError("cannot open " + val.string());
  std::string line;
  if (!std::getline(in, line) || line != "fold,epoch,val_macro_f1") {
    throw ParseError(val.string(), 1, "expected header fold,epoch,val_macro_f1");
  }
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto cells = ensemble::split_csv_line(line);
    if (cells.size() != 3) throw ParseError(val.string(), n, "expected 3 fields");
    store.set_val_f1(parse_int(cells[0], val, n), parse_int(cells[1], val, n), parse_real(cells[2], val, n));
  }
  return store;
}

std::string to_string(Reduction r) { return r == Reduction::MEAN_ALL ? "MEAN_ALL" : "MEAN_BEST_EPOCH"; }

Reduction parse_reduction(const std::string& text) {
  if (text == "MEAN_ALL") return Reduction::MEAN_ALL;
  if (text == "MEAN_BEST_EPOCH") return Reduction::MEAN_BEST_EPOCH;
  throw ContractError("unknown reduction '" + text + "' (expected MEAN_ALL or MEAN_BEST_EPOCH)");
}

std::map<int, int> best_epochs(const ScoreStore& store) {
  std::map<int, std::pair<int, double>> best;
  for (const auto& [key, f1] : store.val_f1()) {  // ascending epoch within a fold
    auto it = best.find(key.first);
    if (it == best.end() || f1 >= it->second.second) best[key.first] = {key.second, f1};
  }
  std::map<int, int> out;
  for (const auto& [fold, be] : best) out[fold] = be.first;
  return out;
}

ensemble::PredictionMatrix accumulate_scores(const ScoreStore& store, Reduction reduction, int k,
                                             const std::vector<std::string>& image_ids) {
  std::vector<std::string> missing;
  const auto slices = store.slices();
  std::vector<std::pair<int, int>> chosen;
  if (reduction == Reduction::MEAN_BEST_EPOCH) {
    const auto best = best_epochs(store);
    for (int f = 0; f < k; ++f) {
      const auto it = best.find(f);
      if (it == best.end()) {
        missing.push_back("fold " + std::to_string(f) + ": no validation F1");
        continue;
      }
      if (!slices.count({f, it->second})) {
        missing.push_back("fold " + std::to_string(f) + " epoch " + std::to_string(it->second) + ": no test scores");
        continue;
      }
      chosen.emplace_back(f, it->second);
    }
  } else {
    for (int f = 0; f < k; ++f) {
      bool any = false;
      for (const auto& s : slices) {
        if (s.first != f) continue;
        any = true;
        chosen.push_back(s);
      }
      if (!any) missing.push_back("fold " + std::to_string(f) + ": no epochs");
    }
  }
  for (const auto& [f, e] : chosen) {
    for (const auto& id : image_ids) {
      if (!store.entries().count({f, e, id})) {
        missing.push_back("fold " + std::to_string(f) + " epoch " + std::to_string(e) + ": no score for " + id);
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "score store is incomplete for " + to_string(reduction) + ":";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ContractError(msg);
  }

  ensemble::PredictionMatrix out;
  out.image_ids = image_ids;
  out.source = "accumulate(" + to_string(reduction) + ", " + std::to_string(chosen.size()) + " slices)";
  for (const auto& id : image_ids) {
    ProbRow sum{}, lo, hi;
    lo.fill(1.0);
    hi.fill(0.0);
    for (const auto& [f, e] : chosen) {
      const auto& row = store.entries().at({f, e, id});
      for (std::size_t j = 0; j < 6; ++j) {
        sum[j] += row[j];
        lo[j] = std::min(lo[j], row[j]);
        hi[j] = std::max(hi[j], row[j]);
      }
    }
    ProbRow mean{};
    for (std::size_t j = 0; j < 6; ++j) {
      // Keep the mean inside [min, max] despite rounding.
      mean[j] = std::clamp(sum[j] / static_cast<double>(chosen.size()), lo[j], hi[j]);
    }
    out.probabilities.push_back(mean);
  }
  return out;
}

}  // namespace octbio::cv
