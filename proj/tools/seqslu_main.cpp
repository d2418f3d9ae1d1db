#include <iostream>
#include <string>
#include <vector>

#include "seqslu/cli.hpp"

int main(int argc, char** argv) {
  return seqslu::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
