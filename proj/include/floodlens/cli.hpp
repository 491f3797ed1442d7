#pragma once
// Command-line entry point. Exit codes: 0 success, 1 usage error, 2 data error.

namespace floodlens::cli {

int run_cli(int argc, char** argv);

} // namespace floodlens::cli
