#include "bmjb/cli.hpp"

int main(int argc, char** argv) { return bmjb::cli::main_entry(argc, argv); }
