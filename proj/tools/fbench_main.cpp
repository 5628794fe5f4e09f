// Command line entry point. Subcommands are wired up in cli.hpp so the test
// suite can drive the same code paths in-process.

#include "fbench/cli.hpp"

int main(int argc, char** argv) {
    return fbench::cli_main(argc, argv);
}
