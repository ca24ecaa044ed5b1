#ifndef UAI_TOOLS_COMMON_HPP_
#define UAI_TOOLS_COMMON_HPP_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uai/cli.hpp"
#include "uai/dataset.hpp"

namespace uai::cli {

namespace fs = std::filesystem;

// Per-command context shared by every command.
struct Io {
  std::ostream& out;
  std::ostream& err;
};

// Options every command accepts.
struct CommonOptions {
  std::string log;
  std::string run_id;
};

void AddCommonOptions(CLI::App& app, CommonOptions& common);
MetricsLog OpenLog(const CommonOptions& common, const std::string& default_run_id);

// Pre-flight checks, run before any file is written.
void RequireInputFile(const fs::path& path, const std::string& what);
void RequireDataset(const std::string& prefix, const std::string& what);
void RequireOutputPath(const fs::path& path, const std::string& what);
// Throws when an output names the same file as another output or an input.
void RequireDistinct(const std::vector<fs::path>& outputs,
                     const std::vector<fs::path>& inputs);

data::DatasetPaths Prefix(const std::string& prefix);
void SaveStaged(StagedOutputs& staged, const data::EmbeddingDataset& ds,
                const data::DatasetPaths& paths);

// Each command registers its options on `app` and returns the action to run
// once parsing succeeded.
using Action = std::function<void()>;

Action SetupGenSynth(CLI::App& app, const Io& io);
Action SetupTrain(CLI::App& app, const Io& io);
Action SetupExtract(CLI::App& app, const Io& io);
Action SetupEvalVerify(CLI::App& app, const Io& io);
Action SetupEvalCluster(CLI::App& app, const Io& io);
Action SetupEvalDiar(CLI::App& app, const Io& io);

}  // namespace uai::cli

#endif  // UAI_TOOLS_COMMON_HPP_
