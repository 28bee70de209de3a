#include "cli/app.h"

int main(int argc, char** argv) { return ierf::cli::run(argc, argv); }
