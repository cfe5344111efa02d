#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdde {

inline constexpr const char* kLibraryName = "sdde-lab";
inline constexpr const char* kLibraryVersion = "1.0.0";

// Schema tag stamped into every summary.json produced by the runner.
inline constexpr const char* kReportSchema = "sdde-report/1";

// Integration aborts once a state leaves this range; explosion tests rely on
// the throw rather than on inf/nan propagation.
inline constexpr double kBlowupLimit = 1e12;

class PathBlowupError : public std::runtime_error {
 public:
  static constexpr std::size_t kUnknownPath = static_cast<std::size_t>(-1);

  explicit PathBlowupError(double time, std::size_t path_index = kUnknownPath)
      : std::runtime_error(describe(time, path_index)),
        time_(time),
        path_index_(path_index) {}

  double time() const noexcept { return time_; }
  std::size_t path_index() const noexcept { return path_index_; }
  bool has_path_index() const noexcept { return path_index_ != kUnknownPath; }

 private:
  static std::string describe(double time, std::size_t path_index) {
    std::string msg = "path exceeded the finite-state guard at t=" + std::to_string(time);
    if (path_index != kUnknownPath) {
      msg += " (path " + std::to_string(path_index) + ")";
    }
    return msg;
  }

  double time_;
  std::size_t path_index_;
};

}  // namespace sdde
