#include "octbio/models/checkpoint.hpp"

#include <fstream>

#include "octbio/core/digest.hpp"
#include "octbio/core/error.hpp"

namespace octbio::models {

using ojson = nlohmann::ordered_json;

namespace {

ojson body(const Model& model) {
  ojson params = ojson::array();
  for (const auto& [name, t] : model.parameters().items()) {
    params.push_back({{"name", name},
                      {"shape", t.shape()},
                      {"values", std::vector<double>(t.values().begin(), t.values().end())}});
  }
  return {{"format", kCheckpointFormat}, {"spec", model.spec().to_json()}, {"parameters", std::move(params)}};
}

}  // namespace

std::string checkpoint_digest(const Model& model) { return sha256_hex(body(model).dump()); }

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  ojson doc = body(model);
  doc["digest"] = sha256_hex(doc.dump());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out << doc.dump() << '\n';
    if (!out) throw IoError("failed writing checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  ojson doc;
  try {
    doc = ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kCheckpointFormat) {
      throw ValidationError("unsupported checkpoint format in " + path.string(), {doc.at("format").dump()});
    }
    const auto stored = doc.at("digest").get<std::string>();
    auto model = build_model(BackboneSpec::from_json(doc.at("spec")), 0);
    const auto& params = doc.at("parameters");
    auto& set = model->parameters();
    if (params.size() != set.items().size()) {
      throw ValidationError("checkpoint parameter count mismatch in " + path.string(),
                            {std::to_string(params.size()) + " stored vs " + std::to_string(set.items().size())});
    }
    std::vector<std::vector<double>> values;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      const auto& [name, t] = set.items()[i];
      if (p.at("name").get<std::string>() != name || p.at("shape").get<tensor::Shape>() != t.shape()) {
        throw ValidationError("checkpoint layout mismatch in " + path.string(), {"at parameter " + name});
      }
      values.push_back(p.at("values").get<std::vector<double>>());
    }
    set.restore(values);
    const auto actual = checkpoint_digest(*model);
    if (actual != stored) {
      throw ValidationError("checkpoint digest mismatch in " + path.string(), {"stored " + stored, "actual " + actual});
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

}  // namespace octbio::models
