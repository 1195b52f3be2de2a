#include "octbio/cli/run_dir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "octbio/core/digest.hpp"
#include "octbio/core/error.hpp"
#include "octbio/ensemble/prediction.hpp"

namespace octbio::cli {

namespace fs = std::filesystem;

nlohmann::ordered_json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

RunDirectory::RunDirectory(const fs::path& dir, const RunConfig& config, bool force, std::ostream& log)
    : dir_(dir), digest_(config.digest()), out_(log) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());

  const fs::path lock = dir_ / kLock;
  const int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw RunDirError("run directory " + dir_.string() + " is locked by another command (remove " +
                        lock.string() + " if it is stale)");
    }
    throw IoError("cannot create " + lock.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  locked_ = true;

  try {
    const fs::path snapshot = dir_ / kSnapshot;
    bool ours = false;
    if (fs::exists(snapshot)) {
      std::ifstream in(snapshot, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      ours = ss.str() == config.snapshot();
      if (!ours && !force) {
        throw RunDirError("run directory " + dir_.string() + " holds a different config (snapshot digest " +
                          sha256_hex(ss.str()) + ", this config " + digest_ + "); use --force to replace it");
      }
    } else if (!force) {
      for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().filename() != kLock) {
          throw RunDirError("output directory " + dir_.string() +
                            " is not empty and has no config snapshot; use --force to replace it");
        }
      }
    }
    if (force) {
      for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().filename() != kLock) fs::remove_all(entry.path());
      }
      ours = false;
    }
    if (!ours) write_text(snapshot, config.snapshot());
  } catch (...) {
    fs::remove(lock, ec);
    locked_ = false;
    throw;
  }
}

RunDirectory::~RunDirectory() {
  if (locked_) {
    std::error_code ec;
    fs::remove(dir_ / kLock, ec);
  }
}

bool RunDirectory::has_complete_marker() const {
  const fs::path marker = dir_ / kComplete;
  if (!fs::exists(marker)) return false;
  try {
    return read_json(marker).value("config_digest", "") == digest_;
  } catch (const Error&) {
    return false;
  }
}

void RunDirectory::mark_complete(const nlohmann::ordered_json& summary) {
  write_json(dir_ / kComplete, meta_fields(summary));
}

void RunDirectory::clear_complete_marker() {
  std::error_code ec;
  fs::remove(dir_ / kComplete, ec);
}

nlohmann::ordered_json RunDirectory::meta_fields(const nlohmann::ordered_json& extra) const {
  nlohmann::ordered_json j;
  j["config_digest"] = digest_;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

void RunDirectory::write_meta(const fs::path& artifact, const nlohmann::ordered_json& extra) const {
  write_json(ensemble::meta_path(artifact), meta_fields(extra));
}

bool RunDirectory::meta_matches(const fs::path& artifact) const {
  const fs::path meta = ensemble::meta_path(artifact);
  if (!fs::exists(meta) || !fs::exists(artifact)) return false;
  try {
    return read_json(meta).value("config_digest", "") == digest_;
  } catch (const Error&) {
    return false;
  }
}

void RunDirectory::log(const std::string& line) {
  std::lock_guard<std::mutex> lock(log_mutex_);
  out_ << line << '\n';
  out_.flush();
  std::ofstream(dir_ / kLog, std::ios::app) << line << '\n';
}

}  // namespace octbio::cli
