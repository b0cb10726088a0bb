#include "nlinr/cli.hpp"

int main(int argc, char** argv) { return nlinr::run_cli(argc, argv); }
