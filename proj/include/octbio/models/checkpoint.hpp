#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "octbio/models/model.hpp"

namespace octbio::models {

inline constexpr const char* kCheckpointFormat = "octbio-checkpoint/1";

// SHA-256 over the canonical serialisation of spec and parameters.
std::string checkpoint_digest(const Model& model);

// Writes {format, spec, parameters[{name, shape, values}], digest} as JSON.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

// Rebuilds the model from the stored spec and checks the digest.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path);

}  // namespace octbio::models
