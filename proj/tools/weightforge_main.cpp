#include "weightforge/cli.hpp"

int main(int argc, char** argv) { return wf::cli::run(argc, argv); }
