#include "scenegen/cli/cli.hpp"

int main(int argc, char** argv) { return scenegen::run_cli(argc, argv); }
