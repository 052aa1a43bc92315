#include "cli.hpp"

int main(int argc, char** argv) { return ksplab::cli::cli_dispatch(argc, argv); }
