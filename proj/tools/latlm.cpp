#include "latlm/cli/cli.hpp"

int main(int argc, char** argv) { return latlm::cli::run(argc, argv); }
