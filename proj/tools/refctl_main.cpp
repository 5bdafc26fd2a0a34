#include "refctl/cli.hpp"

int main(int argc, char** argv) { return refctl::run_cli(argc, argv); }
