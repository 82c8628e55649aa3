#include "iconika/cli.hpp"

int main(int argc, char** argv) { return iconika::cli::run(argc, argv); }
