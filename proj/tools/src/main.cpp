#include "erlangmix_cli/cli.hpp"

int main(int argc, char** argv) { return erlangmix::cli::run(argc, argv); }
