#include <cstdlib>
#include <iostream>

#include "swapsim/cli.hpp"

int main(int argc, char** argv) {
  std::optional<std::string> env_seed;
  if (const char* s = std::getenv("SWAPSIM_SEED")) env_seed = s;
  return swapsim::cli::dispatch(argc, argv, std::cout, std::cerr, env_seed);
}
