#include "stlane/cli.hpp"

int main(int argc, char** argv) { return stlane::cli::run_cli(argc, argv); }
