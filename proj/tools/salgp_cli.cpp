#include "salgp/commands.hpp"

int main(int argc, char** argv) { return salgp::cli::run(argc, argv); }
