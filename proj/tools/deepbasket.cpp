#include "deepbasket/cli.hpp"

int main(int argc, char** argv) { return deepbasket::run_cli(argc, argv); }
