#include "safrlm/cli.hpp"

int main(int argc, char** argv) { return safrlm::cli_main(argc, argv); }
