#include "bragg/cli.hpp"

int main(int argc, char** argv) { return bragg::cli::run(argc, argv); }
