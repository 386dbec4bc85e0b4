#include "mcdh/cli.hpp"

int main(int argc, char** argv) { return mcdh::cli::dispatch(argc, argv); }
