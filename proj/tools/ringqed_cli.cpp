#include "ringqed/cli.hpp"

int main(int argc, char** argv) { return ringqed::cli::cli_dispatch(argc, argv); }
