#include "cli.hpp"

int main(int argc, char** argv) { return kronecker::cli::run(argc, argv); }
