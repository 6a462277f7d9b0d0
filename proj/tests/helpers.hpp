#pragma once

#include <random>
#include <vector>

#include "files.hpp"
#include "stattn/tensor.hpp"

namespace test_util {

inline stattn::Tensor random_tensor(stattn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(stattn::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return stattn::Tensor(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> values(const stattn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace test_util
