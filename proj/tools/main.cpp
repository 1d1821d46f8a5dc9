#include "lcs2s/cli.hpp"

int main(int argc, char** argv) { return lcs2s::dispatch(argc, argv); }
