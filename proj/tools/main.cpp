#include "edf/cli.hpp"

int main(int argc, char** argv) { return edf::cli::run(argc, argv); }
