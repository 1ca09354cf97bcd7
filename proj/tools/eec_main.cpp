#include "eec/cli.hpp"

int main(int argc, char** argv) { return eec::cli::main(argc, argv); }
