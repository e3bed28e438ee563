#include "aff/cli.hpp"

int main(int argc, char** argv) {
  return aff::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
