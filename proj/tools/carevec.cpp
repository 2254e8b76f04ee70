#include "carevec/cli.hpp"

int main(int argc, char** argv) { return carevec::cli::run(argc, argv); }
