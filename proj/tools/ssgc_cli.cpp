#include "ssgc/cli.hpp"

int main(int argc, char** argv) { return ssgc::cli_main(argc, argv); }
