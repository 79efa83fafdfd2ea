#include "codl/harness.hpp"

int main(int argc, char** argv) { return codl::cli_main(argc, argv); }
