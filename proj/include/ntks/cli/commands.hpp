#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ntks/cli/pipeline.hpp"

namespace ntks::cli {

const std::vector<std::string>& command_names();

// Validates the whole config, then computes. Nothing touches the disk.
FileSet run_command(const std::string& command, const json& cfg);

// Writes every file under `dir` (created if missing). Files are staged under
// temporary names and renamed once all of them have been written.
void write_files(const std::string& dir, const FileSet& files);

// Full command-line entry point; returns the process exit code
// (0 success, 2 validation error, 3 numerical failure).
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ntks::cli
