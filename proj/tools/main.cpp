#include "mmtalker/cli.hpp"

int main(int argc, char** argv) { return mmtalker::cli::dispatch(argc, argv); }
