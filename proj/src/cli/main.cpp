#include "latdiff/cli/run.hpp"

int main(int argc, char** argv) {
  return latdiff::run(std::vector<std::string>(argv, argv + argc));
}
