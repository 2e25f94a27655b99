#include "cpgflex_tools/commands.hpp"

int main(int argc, char** argv) { return cpgflex::tools::run_cli(argc, argv); }
