#pragma once

#include <functional>
#include <vector>

#include "dvtg/tensor.hpp"

namespace dvtg {

// Compares backward() gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h for a scalar-valued function of the given inputs.
// Returns the maximum relative error over all input elements, with the
// relative error floored at unit scale: |a - n| / max(1, |a|, |n|).
// fn must be deterministic across calls.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                  const std::vector<Tensor>& inputs, double h = 1e-5);

}  // namespace dvtg
