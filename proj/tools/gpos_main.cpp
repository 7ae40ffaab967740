#include "gpos/cli.hpp"

int main(int argc, char** argv) { return gpos::cli::run(argc, argv); }
