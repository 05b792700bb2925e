#include "isgd/autodiff/derivatives.hpp"

#include <vector>

namespace isgd::ad {

double value(const LossFn& loss, const ParamVector& theta) {
  Tape<double> tape(theta.values());
  return tape.scalar(loss(tape));
}

ValueAndGradient grad(const LossFn& loss, const ParamVector& theta) {
  Tape<double> tape(theta.values());
  const Var out = loss(tape);
  ValueAndGradient result;
  result.value = tape.scalar(out);
  result.gradient = ParamVector(theta.layout(), tape.gradient(out));
  return result;
}

ParamVector hvp(const LossFn& loss, const ParamVector& theta, const ParamVector& v) {
  theta.require_same_layout(v);
  std::vector<Tangent> seeded(theta.size());
  for (std::size_t i = 0; i < seeded.size(); ++i) seeded[i] = Tangent(theta[i], v[i]);
  Tape<Tangent> tape(seeded);
  const Var out = loss(tape);
  const std::vector<Tangent> g = tape.gradient(out);
  std::vector<double> hv(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) hv[i] = g[i].t;
  return ParamVector(theta.layout(), std::move(hv));
}

}  // namespace isgd::ad
