#include "paris/cli/commands.hpp"

int main(int argc, char** argv) { return paris::cli::run_cli(argc, argv); }
