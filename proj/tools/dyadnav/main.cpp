#include "cli.hpp"

int main(int argc, char** argv) { return dyadnav::run(argc, argv); }
