#include "ntnfc/cli.hpp"

int main(int argc, char** argv) { return ntnfc::cli::run(argc, argv); }
