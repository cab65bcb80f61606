#include "agfn/cli.hpp"

int main(int argc, char** argv) {
  return agfn::cli::run(argc, argv);
}
