#include "case_eval/cli.hpp"

int main(int argc, char** argv) { return case_eval::cli::run(argc, argv); }
