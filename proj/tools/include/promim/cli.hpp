#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "promim/training.hpp"

namespace promim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable that replaces output.root unless an explicit
/// `--set output.root=...` is given.
inline constexpr const char* kOutputRootEnv = "PROMIM_OUTPUT_ROOT";

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// metrics.csv and plots/*.svg derived from a manifest, keyed by path
/// relative to the run directory.
std::map<std::string, std::string> render_outputs(const RunManifest& manifest);

/// Rewrites the derived files of one run directory from its manifest.
void regenerate_run(const std::filesystem::path& run_dir);

}  // namespace promim::cli
