#include "deltagan/cli.hpp"

int main(int argc, char** argv) { return deltagan::run(argc, argv); }
