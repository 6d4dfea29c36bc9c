#include "hbvote/cli.hpp"

int main(int argc, char** argv) { return hbvote::cli::main(argc, argv); }
