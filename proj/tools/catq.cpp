#include "catq/cli.hpp"

int main(int argc, char** argv) { return catq::run_cli(argc, argv); }
