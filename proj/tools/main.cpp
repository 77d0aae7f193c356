#include "regnn/cli.hpp"

int main(int argc, char** argv) { return regnn::cli::main(argc, argv); }
