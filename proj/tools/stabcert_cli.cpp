#include "stabcert/harness.hpp"

int main(int argc, char** argv) { return stabcert::cli_main(argc, argv); }
