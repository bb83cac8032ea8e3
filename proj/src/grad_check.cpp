#include "dvtg/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "dvtg/errors.hpp"

namespace dvtg {

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                  const std::vector<Tensor>& inputs, double h) {
  // Analytic gradients on grad-enabled clones.
  std::vector<Tensor> tracked;
  tracked.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    Tensor c = t.clone();
    c.set_requires_grad(true);
    tracked.push_back(c);
  }
  Tensor out = fn(tracked);
  if (out.numel() != 1) {
    throw ShapeError("grad_check: fn must return a scalar");
  }
  out.backward();

  // Numeric gradients on grad-free clones, one element at a time.
  std::vector<Tensor> probe;
  probe.reserve(inputs.size());
  for (const Tensor& t : inputs) probe.push_back(t.clone());

  double max_rel = 0.0;
  for (std::size_t which = 0; which < probe.size(); ++which) {
    const std::vector<double>& analytic = tracked[which].grad();
    for (std::size_t i = 0; i < probe[which].numel(); ++i) {
      const double orig = probe[which].at(i);
      probe[which].at(i) = orig + h;
      const double fp = fn(probe).value();
      probe[which].at(i) = orig - h;
      const double fm = fn(probe).value();
      probe[which].at(i) = orig;

      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace dvtg
