#include "vqad/cli.hpp"

int main(int argc, char** argv) { return vqad::cli::run(argc, argv); }
