#include "perc/experiments.hpp"

int main(int argc, char** argv) { return perc::cli_main(argc, argv); }
