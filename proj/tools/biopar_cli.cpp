#include "biopar/cli.hpp"

int main(int argc, char** argv) { return biopar::cli::run_cli(argc, argv); }
