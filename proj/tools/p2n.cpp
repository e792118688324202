#include "p2n/cli.hpp"

int main(int argc, char** argv) { return p2n::cli::run_cli(argc, argv); }
