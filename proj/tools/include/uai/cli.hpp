#ifndef UAI_CLI_HPP_
#define UAI_CLI_HPP_

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace uai::cli {

// Runs one command. `args` excludes the program name. Returns the exit
// code: 0 iff the command's artifacts were fully written.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Append-only TSV: run_id, stage, metric, value, wall_clock. wall_clock is
// Unix time in seconds, derived from a steady clock so it never decreases
// within a run. The file is opened on the first record.
class MetricsLog {
 public:
  MetricsLog() = default;  // discards records
  MetricsLog(const std::filesystem::path& path, std::string run_id);

  void Record(std::string_view stage, std::string_view metric, double value);
  bool enabled() const { return !path_.empty(); }

 private:
  std::filesystem::path path_;
  std::ofstream file_;
  std::string run_id_;
  double start_unix_ = 0.0;
  std::chrono::steady_clock::time_point start_;
};

// Writes go to "<path>.partial" files that Commit() renames into place.
// Uncommitted partial files are removed on destruction.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs();

  // Opens a binary stream on the partial file for `path`.
  std::ofstream& Open(const std::filesystem::path& path);
  void Commit();

 private:
  struct Entry {
    std::filesystem::path final_path;
    std::filesystem::path partial_path;
    std::ofstream stream;
  };
  std::deque<Entry> entries_;
  bool committed_ = false;
};

// Shortest text that parses back to the same double.
std::string FormatDouble(double v);

}  // namespace uai::cli

#endif  // UAI_CLI_HPP_
