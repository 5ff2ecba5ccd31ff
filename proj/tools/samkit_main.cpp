#include "samkit/cli.hpp"

int main(int argc, char** argv) { return samkit::run_cli(argc, argv); }
