#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace spg::lab {

// Reads the evaluation cells under a recipe root and writes the five protocol
// tables (retirement, noise, gap, alpha, shuffle) plus summary.json with the
// acceptance-criteria verdicts. Returns the summary. Cells that are missing
// (failed or skipped arms) degrade the affected rows and criteria rather than
// aborting the report.
nlohmann::json compose_report(const std::string& root, const std::string& out_dir,
                              std::ostream& log);

// One protocol table on its own, written to `out_path`.
void write_protocol_csv(const std::string& root, const std::string& protocol,
                        const std::string& out_path);

}  // namespace spg::lab
