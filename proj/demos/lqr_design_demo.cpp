// Designs the discrete current controller for the default LCL filter and
// prints the gain, its d-q symmetry defect, and the closed-loop eigenvalues.

#include <iostream>

#include "gflsync/design.hpp"
#include "gflsync/lqr.hpp"

int main() {
  using namespace gflsync;
  const LclParams lcl;
  for (const bool high : {false, true}) {
    const auto d = design_lqr(lcl, high ? LqrWeights::high() : LqrWeights::low(), 1e-4);
    std::cout << (high ? "high" : "low") << "-weight gain K:\n" << d.k << "\n";
    std::cout << "symmetry defect: " << gain_symmetry_defect(d.k) << "\n";
    std::cout << "closed-loop |eig|:";
    for (const auto& v : d.closed_loop_spectrum().values) std::cout << ' ' << std::abs(v);
    std::cout << "\n\n";
  }
  return 0;
}
