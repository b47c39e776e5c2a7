#include "bq/cli.hpp"

int main(int argc, char** argv) { return bq::cli::run(argc, argv); }
