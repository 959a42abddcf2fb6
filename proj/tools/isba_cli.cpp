#include "isba/cli.hpp"

int main(int argc, char** argv) { return isba::cli::run(argc, argv); }
