// Writes the synthetic stand-in for the 1211-case day-count table: draws from
// the Weibull mixture at rate 0.135, shape 1.645, p 0.655, floored to whole days.

#include <cmath>
#include <iostream>
#include <map>

#include "fwdmix/simulate.hpp"

int main() {
  using namespace fwdmix;
  const MixtureModel model(IncubationFamily::weibull(0.135, 1.645), 0.655);
  const auto s = sample_mixture(model, 1211, 20200123);
  std::map<long, long> counts;
  for (double t : s.times()) ++counts[static_cast<long>(std::floor(t))];
  std::cout << "day,count\n";
  for (const auto& [day, c] : counts) std::cout << day << ',' << c << '\n';
}
