#include "kgqa/numerics/adam.hpp"

#include <cmath>

#include "kgqa/error.hpp"

namespace kgqa::nn {

void Adam::step(ParameterStore& params) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& [name, p] : params) {
    if (!p.grad.same_shape(p.value)) {
      throw DimensionError("gradient of '" + name + "' has shape " + shape_string(p.grad));
    }
    auto [it, fresh] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (fresh) {
      mo.m = Tensor(p.value.rows(), p.value.cols());
      mo.v = Tensor(p.value.rows(), p.value.cols());
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = mo.m[i] / c1;
      const double vhat = mo.v[i] / c2;
      p.value[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace kgqa::nn
