#include "octbio/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "octbio/core/digest.hpp"
#include "octbio/core/error.hpp"

namespace octbio::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Shortest text that parses back to the same double.
std::string real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string boolean(bool b) { return b ? "true" : "false"; }

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ContractError("config key " + key + ": '" + value + "' is not " + expected);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "an integer");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const unsigned long long x = std::stoull(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a non-negative integer");
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a number");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

template <typename F>
auto parsed(const std::string& key, const std::string& v, F parse) {
  try {
    return parse(v);
  } catch (const ContractError& e) {
    throw ContractError("config key " + key + ": " + e.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"output_dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
      {"dataset.train_manifest", [](RunConfig& c, auto&, auto& v) { c.train_manifest = v; }},
      {"dataset.test_manifest", [](RunConfig& c, auto&, auto& v) { c.test_manifest = v; }},
      {"dataset.test_unlabeled", [](RunConfig& c, auto& k, auto& v) { c.test_unlabeled = to_bool(k, v); }},
      {"fixture.patients", [](RunConfig& c, auto& k, auto& v) { c.fixture.n_patients = static_cast<int>(to_int(k, v)); }},
      {"fixture.images_per_patient",
       [](RunConfig& c, auto& k, auto& v) { c.fixture.images_per_patient = static_cast<int>(to_int(k, v)); }},
      {"fixture.image_size", [](RunConfig& c, auto& k, auto& v) { c.fixture.image_size = static_cast<int>(to_int(k, v)); }},
      {"fixture.test_patients",
       [](RunConfig& c, auto& k, auto& v) { c.fixture_test_patients = static_cast<int>(to_int(k, v)); }},
      {"model.kind", [](RunConfig& c, auto& k, auto& v) { c.model.kind = parsed(k, v, models::parse_backbone_kind); }},
      {"model.input_size", [](RunConfig& c, auto& k, auto& v) { c.model.input_size = static_cast<int>(to_int(k, v)); }},
      {"model.width", [](RunConfig& c, auto& k, auto& v) { c.model.width = static_cast<int>(to_int(k, v)); }},
      {"model.depth", [](RunConfig& c, auto& k, auto& v) { c.model.depth = static_cast<int>(to_int(k, v)); }},
      {"model.window", [](RunConfig& c, auto& k, auto& v) { c.model.window = static_cast<int>(to_int(k, v)); }},
      {"model.heads", [](RunConfig& c, auto& k, auto& v) { c.model.heads = static_cast<int>(to_int(k, v)); }},
      {"model.patch", [](RunConfig& c, auto& k, auto& v) { c.model.patch = static_cast<int>(to_int(k, v)); }},
      {"model.mlp_ratio", [](RunConfig& c, auto& k, auto& v) { c.model.mlp_ratio = static_cast<int>(to_int(k, v)); }},
      {"model.outputs", [](RunConfig& c, auto& k, auto& v) { c.model.n_outputs = static_cast<int>(to_int(k, v)); }},
      {"model.use_cbam", [](RunConfig& c, auto& k, auto& v) { c.model.use_cbam = to_bool(k, v); }},
      {"model.cbam_reduction",
       [](RunConfig& c, auto& k, auto& v) { c.model.cbam_reduction = static_cast<int>(to_int(k, v)); }},
      {"model.cbam_kernel", [](RunConfig& c, auto& k, auto& v) { c.model.cbam_kernel = static_cast<int>(to_int(k, v)); }},
      {"train.lr", [](RunConfig& c, auto& k, auto& v) { c.train.lr = to_real(k, v); }},
      {"train.lr_decay", [](RunConfig& c, auto& k, auto& v) { c.train.lr_decay = to_real(k, v); }},
      {"train.weight_decay", [](RunConfig& c, auto& k, auto& v) { c.train.weight_decay = to_real(k, v); }},
      {"train.batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = static_cast<int>(to_int(k, v)); }},
      {"train.grad_accum_steps",
       [](RunConfig& c, auto& k, auto& v) { c.train.grad_accum_steps = static_cast<int>(to_int(k, v)); }},
      {"train.epochs", [](RunConfig& c, auto& k, auto& v) { c.train.epochs = static_cast<int>(to_int(k, v)); }},
      {"train.early_stop", [](RunConfig& c, auto& k, auto& v) { c.train.early_stop = parsed(k, v, cv::parse_early_stop); }},
      {"train.patience", [](RunConfig& c, auto& k, auto& v) { c.train.patience = static_cast<int>(to_int(k, v)); }},
      {"train.phase",
       [](RunConfig& c, auto& k, auto& v) {
         c.train.phase = parsed(k, v, [](const std::string& s) { return augment::parse_phase(s); });
       }},
      {"train.augment", [](RunConfig& c, auto& k, auto& v) { c.train.augment = to_bool(k, v); }},
      {"train.k", [](RunConfig& c, auto& k, auto& v) { c.train.k = static_cast<int>(to_int(k, v)); }},
      {"train.grouping", [](RunConfig& c, auto& k, auto& v) { c.train.grouping = parsed(k, v, cv::parse_grouping); }},
      {"train.reduction", [](RunConfig& c, auto& k, auto& v) { c.reduction = parsed(k, v, cv::parse_reduction); }},
      {"train.jobs", [](RunConfig& c, auto& k, auto& v) { c.jobs = static_cast<int>(to_int(k, v)); }},
      {"train.eval_batch_size",
       [](RunConfig& c, auto& k, auto& v) { c.train.eval_batch_size = static_cast<int>(to_int(k, v)); }},
      {"augment.grayscale_p", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.grayscale_p = to_real(k, v); }},
      {"augment.jitter_p", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.jitter_p = to_real(k, v); }},
      {"augment.brightness", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.jitter.brightness = to_real(k, v); }},
      {"augment.contrast", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.jitter.contrast = to_real(k, v); }},
      {"augment.saturation", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.jitter.saturation = to_real(k, v); }},
      {"augment.hue", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.jitter.hue = to_real(k, v); }},
      {"augment.crop_scale_min", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.crop_scale.first = to_real(k, v); }},
      {"augment.crop_scale_max", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.crop_scale.second = to_real(k, v); }},
      {"augment.crop_aspect_min",
       [](RunConfig& c, auto& k, auto& v) { c.train.recipe.crop_aspect.first = to_real(k, v); }},
      {"augment.crop_aspect_max",
       [](RunConfig& c, auto& k, auto& v) { c.train.recipe.crop_aspect.second = to_real(k, v); }},
      {"augment.hflip_p", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.hflip_p = to_real(k, v); }},
      {"augment.perspective_distortion",
       [](RunConfig& c, auto& k, auto& v) { c.train.recipe.perspective->distortion_scale = to_real(k, v); }},
      {"augment.perspective_p", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.perspective->p = to_real(k, v); }},
      {"augment.perspective_fill",
       [](RunConfig& c, auto& k, auto& v) { c.train.recipe.perspective->fill = static_cast<int>(to_int(k, v)); }},
      {"augment.norm_mean", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.norm_mean = to_real(k, v); }},
      {"augment.norm_std", [](RunConfig& c, auto& k, auto& v) { c.train.recipe.norm_std = to_real(k, v); }},
      {"ensemble.scheme", [](RunConfig& c, auto& k, auto& v) { c.scheme = parsed(k, v, ensemble::parse_scheme); }},
      {"ensemble.weight_a", [](RunConfig& c, auto& k, auto& v) { c.weight_a = to_real(k, v); }},
      {"ensemble.routing",
       [](RunConfig& c, auto& k, auto& v) {
         parsed(k, v, [](const std::string& s) { return ensemble::RoutingTable::defaults().with_overrides(s); });
         c.routing = v;
       }},
      {"ensemble.threshold", [](RunConfig& c, auto& k, auto& v) { c.threshold = to_real(k, v); }},
      {"metrics.image_policy",
       [](RunConfig& c, auto& k, auto& v) { c.metrics.image_policy = parsed(k, v, metrics::parse_zero_division); }},
      {"metrics.patient_policy",
       [](RunConfig& c, auto& k, auto& v) { c.metrics.patient_policy = parsed(k, v, metrics::parse_zero_division); }},
      {"metrics.patient_by_week", [](RunConfig& c, auto& k, auto& v) { c.metrics.patient_by_week = to_bool(k, v); }},
      {"metrics.outlier_threshold", [](RunConfig& c, auto& k, auto& v) { c.outlier_threshold = to_real(k, v); }},
  };
  return table;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, n, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(origin, n, "empty key");
    if (map.count(key)) throw ParseError(origin, n, "duplicate key " + key);
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string render_config(const ConfigMap& map) {
  std::string out;
  for (const auto& [k, v] : map) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

RunConfig make_run_config(const ConfigMap& map) {
  std::vector<std::string> unknown;
  for (const auto& [k, _] : map) {
    if (!setters().count(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ContractError(msg);
  }
  RunConfig c;
  if (const auto it = map.find("model.kind"); it != map.end()) setters().at("model.kind")(c, it->first, it->second);
  c.train = cv::TrainConfig::defaults_for(c.model.kind);
  for (const auto& [k, v] : map) setters().at(k)(c, k, v);
  c.train.seed = c.seed;
  c.train.threshold = c.threshold;
  c.fixture.seed = c.seed;
  c.fixture.split = SplitTag::TRAIN;
  c.fixture.id_prefix = "tr";
  return c;
}

ConfigMap RunConfig::to_map() const {
  return {
      {"seed", std::to_string(seed)},
      {"output_dir", output_dir.string()},
      {"dataset.train_manifest", train_manifest.string()},
      {"dataset.test_manifest", test_manifest.string()},
      {"dataset.test_unlabeled", boolean(test_unlabeled)},
      {"fixture.patients", std::to_string(fixture.n_patients)},
      {"fixture.images_per_patient", std::to_string(fixture.images_per_patient)},
      {"fixture.image_size", std::to_string(fixture.image_size)},
      {"fixture.test_patients", std::to_string(fixture_test_patients)},
      {"model.kind", models::to_string(model.kind)},
      {"model.input_size", std::to_string(model.input_size)},
      {"model.width", std::to_string(model.width)},
      {"model.depth", std::to_string(model.depth)},
      {"model.window", std::to_string(model.window)},
      {"model.heads", std::to_string(model.heads)},
      {"model.patch", std::to_string(model.patch)},
      {"model.mlp_ratio", std::to_string(model.mlp_ratio)},
      {"model.outputs", std::to_string(model.n_outputs)},
      {"model.use_cbam", boolean(model.use_cbam)},
      {"model.cbam_reduction", std::to_string(model.cbam_reduction)},
      {"model.cbam_kernel", std::to_string(model.cbam_kernel)},
      {"augment.grayscale_p", real(train.recipe.grayscale_p)},
      {"augment.jitter_p", real(train.recipe.jitter_p)},
      {"augment.brightness", real(train.recipe.jitter.brightness)},
      {"augment.contrast", real(train.recipe.jitter.contrast)},
      {"augment.saturation", real(train.recipe.jitter.saturation)},
      {"augment.hue", real(train.recipe.jitter.hue)},
      {"augment.crop_scale_min", real(train.recipe.crop_scale.first)},
      {"augment.crop_scale_max", real(train.recipe.crop_scale.second)},
      {"augment.crop_aspect_min", real(train.recipe.crop_aspect.first)},
      {"augment.crop_aspect_max", real(train.recipe.crop_aspect.second)},
      {"augment.hflip_p", real(train.recipe.hflip_p)},
      {"augment.perspective_distortion", real(train.recipe.perspective->distortion_scale)},
      {"augment.perspective_p", real(train.recipe.perspective->p)},
      {"augment.perspective_fill", std::to_string(train.recipe.perspective->fill)},
      {"augment.norm_mean", real(train.recipe.norm_mean)},
      {"augment.norm_std", real(train.recipe.norm_std)},
      {"train.lr", real(train.lr)},
      {"train.lr_decay", real(train.lr_decay)},
      {"train.weight_decay", real(train.weight_decay)},
      {"train.batch_size", std::to_string(train.batch_size)},
      {"train.grad_accum_steps", std::to_string(train.grad_accum_steps)},
      {"train.epochs", std::to_string(train.epochs)},
      {"train.early_stop", cv::to_string(train.early_stop)},
      {"train.patience", std::to_string(train.patience)},
      {"train.phase", std::string(augment::to_string(train.phase))},
      {"train.augment", boolean(train.augment)},
      {"train.k", std::to_string(train.k)},
      {"train.grouping", cv::to_string(train.grouping)},
      {"train.reduction", cv::to_string(reduction)},
      {"train.jobs", std::to_string(jobs)},
      {"train.eval_batch_size", std::to_string(train.eval_batch_size)},
      {"ensemble.scheme", ensemble::to_string(scheme)},
      {"ensemble.weight_a", real(weight_a)},
      {"ensemble.routing", routing},
      {"ensemble.threshold", real(threshold)},
      {"metrics.image_policy", metrics::to_string(metrics.image_policy)},
      {"metrics.patient_policy", metrics::to_string(metrics.patient_policy)},
      {"metrics.patient_by_week", boolean(metrics.patient_by_week)},
      {"metrics.outlier_threshold", real(outlier_threshold)},
  };
}

std::string RunConfig::digest() const { return sha256_hex(snapshot()); }

}  // namespace octbio::cli
