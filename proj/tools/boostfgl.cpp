#include "boostfgl/cli.hpp"

int main(int argc, char** argv) { return boostfgl::run_cli(argc, argv); }
