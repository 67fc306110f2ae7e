#include "mvkm/cli.hpp"

int main(int argc, char** argv) { return mvkm::cli::run(argc, argv); }
