#include "wavemoment/cli.hpp"

int main(int argc, char **argv) { return wavemoment::cli::run_cli(argc, argv); }
