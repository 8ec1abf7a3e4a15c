#include "gtid/cli.hpp"

int main(int argc, char** argv) { return gtid::run_cli(argc, argv); }
