#include "cli.hpp"

int main(int argc, char** argv) { return mfde::cli::main_entry(argc, argv); }
