#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "stnet/autodiff.hpp"
#include "stnet/grad_check.hpp"
#include "test_util.hpp"

using namespace stnet;
using stnet::testing::naive_matmul;
using stnet::testing::random_tensor;

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Tape tape;
  const auto x = Tensor::matrix({{1, 2}, {3, 4}});
  const NodeId out = tape.matmul(tape.constant(Tensor::identity(2)), tape.constant(x));
  EXPECT_EQ(tape.value(out), x);
}

TEST(Matmul, HandCase) {
  const auto a = Tensor::matrix({{1, 2}, {3, 4}});
  const auto b = Tensor::matrix({{5, 6}, {7, 8}});
  // Frozen from the naive triple loop.
  const auto expected = naive_matmul(a, b);
  ASSERT_EQ(expected, Tensor::matrix({{19, 22}, {43, 50}}));
  Tape tape;
  EXPECT_EQ(tape.value(tape.matmul(tape.constant(a), tape.constant(b))), expected);
}

TEST(Matmul, ZeroAnnihilates) {
  Tape tape;
  const NodeId out = tape.matmul(tape.constant(Tensor::zeros(2, 2)), tape.constant(Tensor::matrix({{1, -2}, {9, 4}})));
  EXPECT_EQ(tape.value(out), Tensor::zeros(2, 2));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  const NodeId a = tape.constant(Tensor::zeros(2, 3));
  const NodeId b = tape.constant(Tensor::zeros(2, 3));
  try {
    tape.matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, MatchesNaiveOnRandomShapes) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_tensor(rng, 1 + rng.index(7), 1 + rng.index(7));
    const auto b = random_tensor(rng, a.cols(), 1 + rng.index(7));
    Tape tape;
    EXPECT_LT(max_abs_diff(tape.value(tape.matmul(tape.constant(a), tape.constant(b))), naive_matmul(a, b)), 1e-14);
  }
}

TEST(Elementwise, Definitions) {
  Tape tape;
  const NodeId a = tape.constant(Tensor::matrix({{1, 2}}));
  const NodeId b = tape.constant(Tensor::matrix({{3, 4}}));
  EXPECT_EQ(tape.value(tape.hadamard(a, b)), Tensor::matrix({{3, 8}}));
  EXPECT_EQ(tape.value(tape.add(a, tape.constant(Tensor::zeros(1, 2)))), tape.value(a));
  EXPECT_EQ(tape.value(tape.sub(b, b)), Tensor::zeros(1, 2));
  EXPECT_THROW(tape.add(a, tape.constant(Tensor::zeros(2, 1))), DimensionError);
  EXPECT_THROW(tape.hadamard(a, tape.constant(Tensor::zeros(1, 3))), DimensionError);
}

TEST(Activation, Definitions) {
  Tape tape;
  const NodeId x = tape.variable(Tensor::matrix({{-1, 0, 2}}));
  const NodeId r = tape.relu(x);
  EXPECT_EQ(tape.value(r), Tensor::matrix({{0, 0, 2}}));
  EXPECT_EQ(tape.value(tape.sigmoid(tape.constant(Tensor::vector({0.0}))))[0], 0.5);
  EXPECT_EQ(tape.value(tape.tanh(tape.constant(Tensor::vector({0.0}))))[0], 0.0);

  // Subgradient at exactly zero is zero.
  tape.backward(tape.sum(r));
  EXPECT_EQ(tape.grad(x), Tensor::matrix({{0, 0, 1}}));
}

TEST(Activation, SigmoidStableForLargeInputs) {
  Tape tape;
  const auto &y = tape.value(tape.sigmoid(tape.constant(Tensor::matrix({{-800, 800}}))));
  EXPECT_TRUE(y.all_finite());
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
}

TEST(Softmax, HandCases) {
  Tape tape;
  EXPECT_EQ(tape.value(tape.softmax_rows(tape.constant(Tensor::matrix({{0, 0}})))), Tensor::matrix({{0.5, 0.5}}));
  const auto &big = tape.value(tape.softmax_rows(tape.constant(Tensor::matrix({{1000, 1000}}))));
  EXPECT_EQ(big, Tensor::matrix({{0.5, 0.5}}));
  // [0, ln 3]: exp gives [1, 3], normalized [1/4, 3/4].
  const auto &y = tape.value(tape.softmax_rows(tape.constant(Tensor::matrix({{0, std::log(3.0)}}))));
  EXPECT_NEAR(y[0], 0.25, 1e-15);
  EXPECT_NEAR(y[1], 0.75, 1e-15);
}

TEST(Softmax, RowPropertiesAndShiftInvariance) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.index(6), n = 1 + rng.index(6);
    auto logits = random_tensor(rng, m, n, -20.0, 20.0);
    auto shifted = logits;
    for (std::size_t i = 0; i < m; ++i) {
      const double c = rng.uniform(-50.0, 50.0);
      for (std::size_t j = 0; j < n; ++j) shifted(i, j) += c;
    }
    Tape tape;
    const auto &y = tape.value(tape.softmax_rows(tape.constant(logits)));
    const auto &ys = tape.value(tape.softmax_rows(tape.constant(shifted)));
    for (std::size_t i = 0; i < m; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GT(y(i, j), 0.0);
        EXPECT_LE(y(i, j), 1.0);
        if (n > 1) {
          EXPECT_LT(y(i, j), 1.0);
        }
        row += y(i, j);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
    EXPECT_LT(max_abs_diff(y, ys), 1e-12);
  }
}

TEST(ConcatCols, DefinitionNeutralElementAndGradient) {
  Tape tape;
  EXPECT_EQ(tape.value(tape.concat_cols(tape.constant(Tensor::matrix({{1}})), tape.constant(Tensor::matrix({{2}})))),
            Tensor::matrix({{1, 2}}));

  const auto x = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(tape.value(tape.concat_cols(tape.constant(x), tape.constant(Tensor::zeros(2, 0)))), x);

  const NodeId a = tape.variable(Tensor::matrix({{1, 2}, {3, 4}}));
  const NodeId b = tape.variable(Tensor::matrix({{5}, {6}}));
  tape.backward(tape.sum(tape.concat_cols(a, b)));
  EXPECT_EQ(tape.grad(a), Tensor::ones(2, 2));
  EXPECT_EQ(tape.grad(b), Tensor::ones(2, 1));

  EXPECT_THROW(tape.concat_cols(a, tape.constant(Tensor::zeros(3, 1))), DimensionError);
}

TEST(MseLoss, Cases) {
  Tape tape;
  const NodeId p = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(tape.value(tape.mse_loss(p, p))[0], 0.0);
  EXPECT_EQ(tape.value(tape.mse_loss(tape.constant(Tensor::vector({2.0})), tape.constant(Tensor::vector({0.0}))))[0],
            4.0);
  // Two samples: squared norms 2 and 0, mean 1.
  const NodeId q = tape.constant(Tensor::matrix({{1, 1}, {0, 0}}));
  EXPECT_EQ(tape.value(tape.mse_loss(q, tape.constant(Tensor::zeros(2, 2))))[0], 1.0);
  EXPECT_THROW(tape.mse_loss(q, tape.constant(Tensor::zeros(1, 2))), DimensionError);
}

TEST(MseLoss, NonNegativeAndZeroOnlyOnEquality) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_tensor(rng, 3, 2);
    auto b = a;
    Tape tape;
    EXPECT_EQ(tape.value(tape.mse_loss(tape.constant(a), tape.constant(b)))[0], 0.0);
    b[rng.index(b.size())] += 1e-3;
    EXPECT_GT(tape.value(tape.mse_loss(tape.constant(a), tape.constant(b)))[0], 0.0);
  }
}

TEST(Backward, LinearFunctionalAndSquare) {
  ParamStore params;
  auto &w = params.add("w", Tensor::matrix({{1, -2, 3}, {0.5, 0, 7}}));
  auto &v = params.add("v", Tensor::vector({3.0}));
  {
    Tape tape;
    tape.backward(tape.sum(tape.param(w)));
  }
  EXPECT_EQ(w.grad, Tensor::ones(2, 3));
  {
    Tape tape;
    tape.backward(tape.mse_loss(tape.param(v), tape.constant(Tensor::vector({0.0}))));
  }
  EXPECT_EQ(v.grad[0], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  const NodeId x = tape.variable(Tensor::zeros(2, 2));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Backward, TwiceWithoutZeroingDoublesGradients) {
  Rng rng(9);
  ParamStore params;
  auto &w = params.add("w", random_tensor(rng, 3, 4));
  auto &b = params.add("b", random_tensor(rng, 1, 4));
  Tape tape;
  const NodeId x = tape.constant(random_tensor(rng, 2, 3));
  const NodeId h = tape.tanh(tape.add_bias(tape.matmul(x, tape.param(w)), tape.param(b)));
  const NodeId loss = tape.mse_loss(h, tape.constant(random_tensor(rng, 2, 4)));
  tape.backward(loss);
  const Tensor once_w = w.grad, once_b = b.grad;
  tape.backward(loss);
  for (std::size_t i = 0; i < once_w.size(); ++i) EXPECT_EQ(w.grad[i], 2.0 * once_w[i]);
  for (std::size_t i = 0; i < once_b.size(); ++i) EXPECT_EQ(b.grad[i], 2.0 * once_b[i]);
}

TEST(Backward, ConstantsReceiveNoGradientWork) {
  Tape tape;
  const NodeId c = tape.constant(Tensor::ones(2, 2));
  const NodeId v = tape.variable(Tensor::ones(2, 2));
  tape.backward(tape.sum(tape.hadamard(c, v)));
  EXPECT_EQ(tape.grad(c), Tensor::zeros(2, 2));
  EXPECT_EQ(tape.grad(v), Tensor::ones(2, 2));
  EXPECT_FALSE(tape.node(c).requires_grad);
}

TEST(GradCheck, MatmulMse) {
  Rng rng(21);
  ParamStore params;
  auto &w = params.add("w", random_tensor(rng, 3, 2));
  const auto x = random_tensor(rng, 4, 3);
  const auto y = random_tensor(rng, 4, 2);
  const auto res = grad_check(
      [&](Tape &t) { return t.mse_loss(t.matmul(t.constant(x), t.param(w)), t.constant(y)); }, params, 1e-6, 1e-6);
  EXPECT_LT(res.max_relative_error, 1e-6);
  EXPECT_TRUE(res.passed);
  EXPECT_EQ(res.entries_checked, 6u);
}

TEST(GradCheck, ZeroParametersIsVacuous) {
  ParamStore params;
  const auto res = grad_check([](Tape &t) { return t.sum(t.constant(Tensor::ones(2, 2))); }, params, 1e-6, 1e-5);
  EXPECT_EQ(res.max_relative_error, 0.0);
  EXPECT_EQ(res.entries_checked, 0u);
}

TEST(GradCheck, NonDeterministicBuilderRejected) {
  ParamStore params;
  params.add("w", Tensor::ones(1, 1));
  int calls = 0;
  EXPECT_THROW(grad_check(
                   [&](Tape &t) {
                     ++calls;
                     return t.sum(t.constant(Tensor::filled(1, 1, static_cast<double>(calls))));
                   },
                   params, 1e-6, 1e-5),
               ContractError);
}

TEST(SymNormalize, DegreeGradientThroughTape) {
  // Row-sum degrees make A -> D^-1/2 A D^-1/2 nonlinear in A; check both loop modes.
  Rng rng(4);
  for (bool loops : {false, true}) {
    ParamStore params;
    auto &a = params.add("a", random_tensor(rng, 4, 4, 0.1, 2.0));
    const auto probe = random_tensor(rng, 4, 4);
    const auto res = grad_check(
        [&](Tape &t) { return t.sum(t.hadamard(t.sym_normalize(t.param(a), loops), t.constant(probe))); }, params);
    EXPECT_LT(res.max_relative_error, 1e-7) << "loops=" << loops;
  }
}

// Random composite graphs: a fixed random program is replayed by the builder so
// the finite-difference loop sees the same function every time.
namespace {

struct RandomProgram {
  std::vector<std::function<NodeId(Tape &, NodeId)>> steps;
  std::function<NodeId(Tape &, NodeId)> head;
  NodeId run(Tape &t, ParamStore &params) const {
    NodeId x = t.param(params.get("x0"));
    for (const auto &s : steps) x = s(t, x);
    return head(t, x);
  }
};

RandomProgram make_program(Rng &rng, ParamStore &params) {
  RandomProgram prog;
  std::size_t rows = 1 + rng.index(4), cols = 1 + rng.index(4);
  params.add("x0", random_tensor(rng, rows, cols));
  const std::size_t depth = 2 + rng.index(5);
  for (std::size_t step = 0; step < depth; ++step) {
    const std::string tag = "p" + std::to_string(step);
    switch (rng.index(14)) {
      case 0: {
        const std::size_t k = 1 + rng.index(4);
        auto &w = params.add(tag, random_tensor(rng, cols, k));
        prog.steps.push_back([&w](Tape &t, NodeId x) { return t.matmul(x, t.param(w)); });
        cols = k;
        break;
      }
      case 1: {
        auto &w = params.add(tag, random_tensor(rng, rows, cols));
        prog.steps.push_back([&w](Tape &t, NodeId x) { return t.add(x, t.param(w)); });
        break;
      }
      case 2: {
        auto &w = params.add(tag, random_tensor(rng, rows, cols));
        prog.steps.push_back([&w](Tape &t, NodeId x) { return t.sub(t.param(w), x); });
        break;
      }
      case 3: {
        auto &w = params.add(tag, random_tensor(rng, rows, cols));
        prog.steps.push_back([&w](Tape &t, NodeId x) { return t.hadamard(x, t.param(w)); });
        break;
      }
      case 4:
        prog.steps.push_back([](Tape &t, NodeId x) { return t.relu(x); });
        break;
      case 5:
        prog.steps.push_back([](Tape &t, NodeId x) { return t.sigmoid(x); });
        break;
      case 6:
        prog.steps.push_back([](Tape &t, NodeId x) { return t.tanh(x); });
        break;
      case 7:
        prog.steps.push_back([](Tape &t, NodeId x) { return t.softmax_rows(x); });
        break;
      case 8: {
        const std::size_t q = 1 + rng.index(3);
        auto &w = params.add(tag, random_tensor(rng, rows, q));
        const bool left = rng.index(2) == 0;
        prog.steps.push_back([&w, left](Tape &t, NodeId x) {
          return left ? t.concat_cols(t.param(w), x) : t.concat_cols(x, t.param(w));
        });
        cols += q;
        break;
      }
      case 9: {
        const std::size_t start = rng.index(cols);
        const std::size_t width = 1 + rng.index(cols - start);
        prog.steps.push_back([start, width](Tape &t, NodeId x) { return t.slice_cols(x, start, width); });
        cols = width;
        break;
      }
      case 10:
        prog.steps.push_back([](Tape &t, NodeId x) { return t.transpose(x); });
        std::swap(rows, cols);
        break;
      case 11: {
        const bool loops = rng.index(2) == 0;
        prog.steps.push_back([loops](Tape &t, NodeId x) {
          return t.sym_normalize(t.sigmoid(t.matmul(x, t.transpose(x))), loops);
        });
        cols = rows;
        break;
      }
      case 12: {
        auto &b = params.add(tag, random_tensor(rng, 1, cols));
        const std::size_t k = 1 + rng.index(3);
        const bool tile = rng.index(2) == 0;
        prog.steps.push_back([&b, k, tile](Tape &t, NodeId x) {
          const NodeId y = t.add_bias(x, t.param(b));
          return tile ? t.tile_rows(y, k) : t.repeat_rows(y, k);
        });
        rows *= k;
        break;
      }
      default: {
        const std::size_t block = (rows % 2 == 0 && rng.index(2) == 0) ? rows / 2 : rows;
        auto &a = params.add(tag, random_tensor(rng, block, block));
        const double s = rng.uniform(0.5, 1.5);
        prog.steps.push_back(
            [&a, s](Tape &t, NodeId x) { return t.scale(t.block_left_matmul(t.param(a), x), s); });
        break;
      }
    }
  }
  if (rng.index(2) == 0) {
    prog.head = [](Tape &t, NodeId x) { return t.sum(t.hadamard(x, x)); };
  } else {
    auto target = random_tensor(rng, rows, cols);
    prog.head = [target](Tape &t, NodeId x) { return t.mse_loss(x, t.constant(target)); };
  }
  return prog;
}

}  // namespace

TEST(GradCheck, RandomCompositeGraphsMatchFiniteDifferences) {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    ParamStore params;
    const auto prog = make_program(rng, params);
    const auto res = grad_check([&](Tape &t) { return prog.run(t, params); }, params, 1e-6, 1e-5);
    EXPECT_LT(res.max_relative_error, 1e-5)
        << "trial " << trial << " worst " << res.worst_parameter << "[" << res.worst_index << "]";
    ++checked;
  }
  EXPECT_GE(checked, 100);
}
