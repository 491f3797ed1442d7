#include "floodlens/cli.hpp"

int main(int argc, char** argv) { return floodlens::cli::run_cli(argc, argv); }
