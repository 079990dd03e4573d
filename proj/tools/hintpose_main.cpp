#include "hintpose/cli.hpp"

int main(int argc, char** argv) { return hintpose::cli::run(argc, argv); }
