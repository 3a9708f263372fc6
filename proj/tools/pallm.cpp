#include "pallm/cli.hpp"

int main(int argc, char** argv) { return pallm::cli::run_cli(argc, argv); }
