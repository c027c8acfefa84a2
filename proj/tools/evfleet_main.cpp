#include "evfleet/runner.hpp"

int main(int argc, char** argv) { return evfleet::run_cli(argc, argv); }
