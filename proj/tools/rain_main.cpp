#include "rain/cli.hpp"

int main(int argc, char** argv) { return rain::run_cli(argc, argv); }
