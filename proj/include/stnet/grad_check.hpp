#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "stnet/autodiff.hpp"

namespace stnet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
  bool passed = true;
};

/// Builds a fresh tape and returns the id of its scalar loss node.
using LossBuilder = std::function<NodeId(Tape &)>;

/// Compares tape gradients against central finite differences for every entry
/// of every parameter in `params`.
///
/// Error per entry is |analytic - numeric| / max(1, |analytic|, |numeric|).
/// Parameter values are restored before returning; accumulated gradients are
/// left zeroed.
inline GradCheckResult grad_check(const LossBuilder &build, ParamStore &params, double step = 1e-6,
                                  double tolerance = 1e-5) {
  const auto evaluate = [&]() {
    Tape tape;
    const NodeId loss = build(tape);
    const Tensor &v = tape.value(loss);
    if (v.size() != 1) throw ContractError("grad_check: loss is not scalar, shape " + shape_str(v.shape()));
    return v[0];
  };

  const double first = evaluate();
  const double second = evaluate();
  if (!(first == second) && !(std::isnan(first) && std::isnan(second))) {
    throw ContractError("grad_check: loss builder is not deterministic");
  }

  params.zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }

  GradCheckResult result;
  for (auto &p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = evaluate();
      p.value[i] = saved - step;
      const double down = evaluate();
      p.value[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[i];
      const double err =
          std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++result.entries_checked;
      if (err > result.max_relative_error || std::isnan(err)) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  params.zero_grad();
  result.passed = result.max_relative_error < tolerance;
  return result;
}

}  // namespace stnet
