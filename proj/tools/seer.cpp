#include "seer/cli.hpp"

int main(int argc, char** argv) { return seer::cli::dispatch(argc, argv); }
