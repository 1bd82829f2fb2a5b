#include <iostream>

#include "suite.hpp"

int main() {
  const auto results = acceptance::run_all(&std::cerr);
  acceptance::print(std::cout, results);
  return acceptance::all_passed(results) ? 0 : 1;
}
