#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli/config.hpp"
#include "cli/dataset.hpp"
#include "drest/mc.hpp"

namespace drest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

struct SimulateOutput {
  std::string results_csv;
  std::string metadata_json;
  std::string values_csv;  // empty unless write_values
};

// Runs every (scenario, n) cell of the configuration. The bytes produced do
// not depend on `workers`.
SimulateOutput simulate(const RunConfig& config, unsigned workers);

std::string results_header();

nlohmann::json estimate_report(const Dataset& data, const EstimateConfig& config);

nlohmann::json sensitivity_report(const Dataset& data, const SensitivityConfig& config, unsigned workers);

// "# " metadata lines, then grid,density rows.
std::string density_csv(const std::vector<double>& values, const DensityOptions& options, const std::string& source);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace drest::cli
