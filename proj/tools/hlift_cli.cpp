#include "hlift/cli/commands.hpp"

int main(int argc, char** argv) { return hlift::cli::run(argc, argv); }
