#include "powertrace/cli.hpp"

int main(int argc, char** argv) { return powertrace::run_cli(argc, argv); }
