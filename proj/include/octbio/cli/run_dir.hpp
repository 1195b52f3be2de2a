#pragma once

#include <filesystem>
#include <mutex>
#include <ostream>
#include <string>

#include "json.hpp"
#include "octbio/cli/config.hpp"

namespace octbio::cli {

// Output directory owned by one command at a time. Opening it takes
// `run.lock`; the config snapshot is written before anything else, and every
// artifact gets a `<artifact>.meta.json` carrying the config digest.
class RunDirectory {
 public:
  // A directory holding a different config is refused unless `force`, which
  // clears it first. Throws RunDirError.
  RunDirectory(const std::filesystem::path& dir, const RunConfig& config, bool force, std::ostream& log);
  ~RunDirectory();
  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path operator/(const std::string& rel) const { return dir_ / rel; }
  const std::string& config_digest() const { return digest_; }

  bool has_complete_marker() const;
  void mark_complete(const nlohmann::ordered_json& summary = nlohmann::ordered_json::object());
  void clear_complete_marker();

  void write_meta(const std::filesystem::path& artifact,
                  const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) const;
  nlohmann::ordered_json meta_fields(const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) const;
  // Meta exists and carries this run's digest.
  bool meta_matches(const std::filesystem::path& artifact) const;

  void log(const std::string& line);

  static constexpr const char* kSnapshot = "config.snapshot";
  static constexpr const char* kLock = "run.lock";
  static constexpr const char* kComplete = "COMPLETE";
  static constexpr const char* kLog = "run.log";

 private:
  std::filesystem::path dir_;
  std::string digest_;
  std::ostream& out_;
  std::mutex log_mutex_;
  bool locked_ = false;
};

class RunDirError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::ordered_json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace octbio::cli
