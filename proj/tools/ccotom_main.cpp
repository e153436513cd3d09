#include "ccotom/cli.hpp"

int main(int argc, char** argv) { return ccotom::cli::run(argc, argv); }
