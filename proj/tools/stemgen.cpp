#include "stemgen/cli.hpp"

int main(int argc, char** argv) { return stemgen::cli::dispatch(argc, argv); }
