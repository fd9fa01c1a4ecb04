#include "tsodso/cli.hpp"

int main(int argc, char** argv) { return tsodso::run_cli(argc, argv); }
