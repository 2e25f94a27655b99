#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpgflex/body.hpp"
#include "cpgflex/errors.hpp"
#include "cpgflex/genome.hpp"

namespace cpgflex::tools {

/// Bad flags, missing files or an unusable output directory (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A CPG genome with optional filter layer, as passed between commands.
struct Controller {
  std::string name;
  body::Morphology morphology = body::Morphology::Normal;
  genome::Genome cpg;
  std::optional<double> natural_period;
  std::optional<genome::Genome> filter;
  nlohmann::json info = nlohmann::json::object();
};

nlohmann::json to_json(const Controller& c);
Controller controller_from_json(const nlohmann::json& doc);

/// JSON with // and /* */ comments allowed.
nlohmann::json read_json_file(const std::filesystem::path& path);

struct RunContext {
  std::filesystem::path out;
  unsigned workers = 1;
  std::ostream* log = nullptr;
  /// For `resume`: the directory holding the interrupted run.
  std::optional<std::filesystem::path> resume_from;
};

/// Commands: evolve-cpg, evolve-filter, reps, sweep, entrain, analyze.
std::vector<std::string> command_names();

/// Fills defaults and inlines referenced files; the result is what the manifest stores.
nlohmann::json resolve_config(const std::string& command, nlohmann::json config,
                              const std::filesystem::path& base_dir);

/// Runs a command from a resolved config, writing into ctx.out (which must be empty or absent).
void run_command(const std::string& command, const nlohmann::json& config, const RunContext& ctx);

/// Entry point for the `cpgflex` executable; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace cpgflex::tools
