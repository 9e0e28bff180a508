#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "mmt/graph.hpp"

namespace mmt {

// Central-difference gradient verification for a scalar-rooted graph. A leaf
// is either an input node (with the external storage it is bound from) or a
// Parameter; parameter gradients are read from the accumulated
// Parameter::grad so shared/reused parameters are checked correctly.
// Returns the max over all leaf elements of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
struct GradCheckLeaf {
  Var var;                     // input leaf node (ignored for parameters)
  Parameter* param = nullptr;  // set when the leaf is a parameter
  DenseArray* bound = nullptr; // set when the leaf is an input

  GradCheckLeaf(Var v, Parameter* p, DenseArray* b) : var(v), param(p), bound(b) {}
  GradCheckLeaf(Parameter* p) : param(p) {}
};

inline double grad_check(Graph& g, Var root, std::vector<GradCheckLeaf> leaves, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw Error("grad_check: eps must be in (0, 1e-2]");

  auto rebind_inputs = [&]() {
    for (auto& leaf : leaves)
      if (leaf.bound) g.bind(leaf.var, *leaf.bound);
  };

  rebind_inputs();
  g.forward(root);
  for (auto& leaf : leaves)
    if (leaf.param) leaf.param->zero_grad();
  g.backward(root);

  // snapshot analytic gradients before perturbation reruns overwrite them
  std::vector<DenseArray> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves)
    analytic.push_back(leaf.param ? leaf.param->grad : g.grad(leaf.var));
  for (auto& leaf : leaves)
    if (leaf.param) leaf.param->zero_grad();

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    double* storage = leaf.param ? leaf.param->value.data() : leaf.bound->data();
    const std::size_t count = leaf.param ? leaf.param->value.size() : leaf.bound->size();
    for (std::size_t i = 0; i < count; ++i) {
      const double orig = storage[i];
      storage[i] = orig + eps;
      rebind_inputs();
      const double fp = g.forward(root).scalar_value();
      storage[i] = orig - eps;
      rebind_inputs();
      const double fm = g.forward(root).scalar_value();
      storage[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[li][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  // restore a consistent forward state
  rebind_inputs();
  g.forward(root);
  return worst;
}

}  // namespace mmt
