#include "evoclass/cli_app.hpp"

int main(int argc, char** argv) { return evoclass::run_cli(argc, argv); }
