// Writes the built-in benchmark systems as CLI-consumable JSON documents:
// the two-state scalar example and both Fisher boundary-control cases.

#include <iostream>
#include <string>

#include "daekron/benchmarks.hpp"
#include "daekron/io.hpp"

int main(int argc, char** argv) {
  using namespace daekron;
  const std::string dir = argc > 1 ? argv[1] : ".";
  try {
    SystemDocument scalar;
    scalar.system = build_scalar_example();
    scalar.name = "scalar-example";
    scalar.eta = 10.0;
    write_system(dir + "/scalar.json", scalar);

    SystemDocument f1;
    f1.system = build_fisher(fisher_case1_config());
    f1.name = "fisher-case1";
    f1.eta = fisher_case1_config().eta;
    write_system(dir + "/fisher_case1.json", f1);

    SystemDocument f2;
    f2.system = build_fisher(fisher_case2_config());
    f2.name = "fisher-case2";
    f2.eta = fisher_case2_config().eta;
    write_system(dir + "/fisher_case2.json", f2);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote scalar.json, fisher_case1.json, fisher_case2.json to " << dir << "\n";
  return 0;
}
