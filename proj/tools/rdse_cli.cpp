#include "rdse/cli.hpp"

int main(int argc, char** argv) { return rdse::cli::run(argc, argv); }
