#include "protoseg/cli.hpp"

int main(int argc, char** argv) { return protoseg::cli_dispatch(argc, argv); }
