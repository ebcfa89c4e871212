#include <malloc.h>

#include <iostream>
#include <string>
#include <vector>

#include "dwt_cli/commands.hpp"

int main(int argc, char** argv) {
  // Tensors are short-lived and large; keeping freed blocks in the heap avoids
  // an mmap/munmap pair and fresh page faults for every op output.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  const std::vector<std::string> args(argv + 1, argv + argc);
  return dwt::cli::run(args, std::cout, std::cerr);
}
