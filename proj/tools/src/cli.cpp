#include <algorithm>
#include <charconv>
#include <cstdio>
#include <ostream>
#include <system_error>

#include "common.hpp"
#include "uai/error.hpp"

namespace uai::cli {

namespace {

struct Command {
  const char* name;
  const char* summary;
  Action (*setup)(CLI::App&, const Io&);
};

constexpr Command kCommands[] = {
    {"gen-synth", "Generate a synthetic factor dataset (optionally split, trials, sessions)",
     SetupGenSynth},
    {"train", "Train a UAI model and write a checkpoint", SetupTrain},
    {"extract", "Write h1 and h2 embeddings for a dataset", SetupExtract},
    {"eval-verify", "LDA + PLDA verification: EER and per-trial scores", SetupEvalVerify},
    {"eval-cluster", "k-means NMI against one or more label factors", SetupEvalCluster},
    {"eval-diar", "Oracle-segment diarization DER per session", SetupEvalDiar},
};

void Usage(std::ostream& out) {
  out << "usage: uai <command> [options]\n\ncommands:\n";
  for (const Command& c : kCommands) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-14s %s\n", c.name, c.summary);
    out << line;
  }
  out << "\nRun 'uai <command> --help' for the command's options. Every command\n"
         "accepts --config FILE with key=value lines named after its long options.\n";
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    Usage(err);
    return 2;
  }
  if (args[0] == "-h" || args[0] == "--help" || args[0] == "help") {
    Usage(out);
    return 0;
  }
  const auto* cmd = std::find_if(std::begin(kCommands), std::end(kCommands),
                                 [&](const Command& c) { return args[0] == c.name; });
  if (cmd == std::end(kCommands)) {
    err << "uai: unknown command '" << args[0] << "'\n\n";
    Usage(err);
    return 2;
  }

  const Io io{out, err};
  CLI::App app{cmd->summary, std::string("uai ") + cmd->name};
  const Action action = cmd->setup(app, io);
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.allow_config_extras(false);

  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    action();
  } catch (const std::exception& e) {
    err << "uai " << cmd->name << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// ---- metrics log -------------------------------------------------------------

MetricsLog::MetricsLog(const std::filesystem::path& path, std::string run_id)
    : path_(path), run_id_(std::move(run_id)) {
  start_unix_ = std::chrono::duration<double>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
  start_ = std::chrono::steady_clock::now();
}

void MetricsLog::Record(std::string_view stage, std::string_view metric, double value) {
  if (path_.empty()) return;
  if (!file_.is_open()) {
    std::error_code ec;
    const bool fresh = !fs::exists(path_, ec) || fs::file_size(path_, ec) == 0;
    file_.open(path_, std::ios::app);
    if (!file_) throw IoError("cannot open metrics log " + path_.string());
    if (fresh) file_ << "run_id\tstage\tmetric\tvalue\twall_clock\n";
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  char stamp[32];
  std::snprintf(stamp, sizeof stamp, "%.6f", start_unix_ + elapsed);
  file_ << run_id_ << '\t' << stage << '\t' << metric << '\t' << FormatDouble(value)
        << '\t' << stamp << '\n';
  file_.flush();
}

// ---- staged outputs ------------------------------------------------------------

StagedOutputs::~StagedOutputs() {
  if (committed_) return;
  for (Entry& e : entries_) {
    e.stream.close();
    std::error_code ec;
    fs::remove(e.partial_path, ec);
  }
}

std::ofstream& StagedOutputs::Open(const std::filesystem::path& path) {
  Entry e;
  e.final_path = path;
  e.partial_path = fs::path(path.string() + ".partial");
  e.stream.open(e.partial_path, std::ios::binary | std::ios::trunc);
  if (!e.stream) throw IoError("cannot open " + e.partial_path.string() + " for writing");
  entries_.push_back(std::move(e));
  return entries_.back().stream;
}

void StagedOutputs::Commit() {
  for (Entry& e : entries_) {
    e.stream.flush();
    if (!e.stream) throw IoError("write failed: " + e.final_path.string());
    e.stream.close();
  }
  for (Entry& e : entries_) {
    std::error_code ec;
    fs::rename(e.partial_path, e.final_path, ec);
    if (ec) throw IoError("cannot move output into place: " + e.final_path.string());
  }
  committed_ = true;
}

// ---- helpers ---------------------------------------------------------------------

std::string FormatDouble(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void AddCommonOptions(CLI::App& app, CommonOptions& common) {
  app.add_option("--log", common.log, "Append metrics to this TSV file");
  app.add_option("--run-id", common.run_id, "Run identifier written to the metrics log");
}

MetricsLog OpenLog(const CommonOptions& common, const std::string& default_run_id) {
  if (common.log.empty()) return {};
  return MetricsLog(common.log, common.run_id.empty() ? default_run_id : common.run_id);
}

void RequireInputFile(const fs::path& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw InputError(what + ": no such file: " + path.string());
  }
}

data::DatasetPaths Prefix(const std::string& prefix) {
  return data::DatasetPaths::FromPrefix(prefix);
}

void RequireDataset(const std::string& prefix, const std::string& what) {
  const data::DatasetPaths p = Prefix(prefix);
  RequireInputFile(p.embeddings, what + " embeddings");
  RequireInputFile(p.labels, what + " labels");
}

void RequireOutputPath(const fs::path& path, const std::string& what) {
  if (path.empty()) throw InputError(what + ": empty output path");
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    throw InputError(what + ": " + path.string() + " is a directory");
  }
  const fs::path parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent, ec)) {
    throw InputError(what + ": directory does not exist: " + parent.string());
  }
}

void RequireDistinct(const std::vector<fs::path>& outputs,
                     const std::vector<fs::path>& inputs) {
  std::vector<fs::path> seen;
  for (const fs::path& p : inputs) seen.push_back(fs::weakly_canonical(p));
  const std::size_t n_inputs = seen.size();
  for (const fs::path& p : outputs) {
    const fs::path c = fs::weakly_canonical(p);
    const auto hit = std::find(seen.begin(), seen.end(), c);
    if (hit != seen.end()) {
      throw InputError(std::string("output ") + p.string() + " would overwrite " +
                       (hit - seen.begin() < static_cast<std::ptrdiff_t>(n_inputs)
                            ? "an input"
                            : "another output"));
    }
    seen.push_back(c);
  }
}

void SaveStaged(StagedOutputs& staged, const data::EmbeddingDataset& ds,
                const data::DatasetPaths& paths) {
  ds.Validate();
  data::WriteEmbeddings(staged.Open(paths.embeddings), ds.embeddings);
  data::WriteLabels(staged.Open(paths.labels), ds);
}

}  // namespace uai::cli
