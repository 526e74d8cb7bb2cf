#include <gtest/gtest.h>

#include <cmath>

#include "stnet/grad_check.hpp"
#include "stnet/model.hpp"
#include "test_util.hpp"

using namespace stnet;
using stnet::testing::naive_matmul;
using stnet::testing::random_tensor;

namespace {

ModelConfig tiny_config(std::size_t nodes = 4, std::size_t channels = 2, Ablation ablation = Ablation::Full) {
  ModelConfig c;
  c.nodes = nodes;
  c.channels = channels;
  c.window = 2;
  c.gcn_dims = {3, 4};
  c.lstm_layers = 1;
  c.lstm_hidden = 5;
  c.embed_dim = 3;
  c.external_embed_dim = 2;
  c.external_hidden = 3;
  c.ablation = ablation;
  return c;
}

Tensor random_window(Rng &rng, const ModelConfig &c) {
  Tensor w({c.window, c.nodes, c.channels});
  for (double &v : w.data()) v = rng.uniform();
  return w;
}

Tensor random_external(Rng &rng, const ModelConfig &c) {
  Tensor e({c.external.width()});
  std::size_t offset = 0;
  for (const auto &cat : c.external.categorical) {
    e[offset + rng.index(cat.levels.size())] = 1.0;
    offset += cat.levels.size();
  }
  for (std::size_t k = 0; k < c.external.continuous.size(); ++k) e[offset + k] = rng.uniform();
  return e;
}

Tensor ring_adjacency(std::size_t n) {
  GraphSpec g{n, {}, false};
  for (std::size_t i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1, 1.0 + 0.5 * static_cast<double>(i)});
  if (n > 2) g.edges.push_back({n - 1, 0, 2.0});
  return build_local_adjacency(g);
}

Tensor relu_of(Tensor t) {
  for (double &v : t.data()) v = v > 0 ? v : 0;
  return t;
}

}  // namespace

TEST(Cgcn, ScalarUnrolling) {
  ModelConfig c = tiny_config(1, 1);
  c.gcn_dims = {1};
  ParamStore ps = init_params(c, 1);
  const double w = 0.7, v = 0.4, fuse = -1.3;
  ps.get(param_names::gcn(View::Local, 0)).value = Tensor::matrix({{w}});
  ps.get(param_names::fusion(View::Local, 0)).value = Tensor::matrix({{fuse}});
  Tape tape;
  const NodeId out = cgcn_forward(tape, tape.constant(Tensor::matrix({{v}})), tape.constant(Tensor::matrix({{1}})),
                                  ps, c, View::Local);
  EXPECT_DOUBLE_EQ(tape.value(out)[0], fuse * std::max(0.0, v * w));
}

TEST(Cgcn, SingleChannelWithUnitFusionIsPlainGcn) {
  Rng rng(3);
  ModelConfig c = tiny_config(5, 1);
  ParamStore ps = init_params(c, 9);
  ps.get(param_names::fusion(View::Local, 0)).value = Tensor::ones(5, c.feature_dim());
  const Tensor adj = normalize_adjacency(ring_adjacency(5), true);
  const Tensor x = random_tensor(rng, 5, 1, 0.0, 1.0);

  Tensor h = x;
  for (std::size_t l = 0; l < c.gcn_dims.size(); ++l)
    h = relu_of(naive_matmul(naive_matmul(adj, h), ps.get(param_names::gcn(View::Local, l)).value));

  Tape tape;
  const NodeId out = cgcn_forward(tape, tape.constant(x), tape.constant(adj), ps, c, View::Local);
  EXPECT_LT(max_abs_diff(tape.value(out), h), 1e-14);
}

TEST(Cgcn, ThreeNodePathTwoChannelsMatchesDenseOracle) {
  ModelConfig c = tiny_config(3, 2);
  c.gcn_dims = {2};
  ParamStore ps = init_params(c, 2);
  const Tensor w = Tensor::matrix({{0.5, -1.0}});
  const Tensor f0 = Tensor::matrix({{1, 2}, {0.5, -1}, {0, 3}});
  const Tensor f1 = Tensor::matrix({{-1, 1}, {2, 0.25}, {1, 1}});
  ps.get(param_names::gcn(View::Local, 0)).value = w;
  ps.get(param_names::fusion(View::Local, 0)).value = f0;
  ps.get(param_names::fusion(View::Local, 1)).value = f1;
  const Tensor x = Tensor::matrix({{0.2, 0.9}, {0.6, 0.1}, {1.0, 0.4}});

  // Path 0-1 (dis 1), 1-2 (dis 4) with self-loops; degrees 2, 2.25, 1.25.
  const double s0 = 1 / std::sqrt(2.0), s1 = 1 / std::sqrt(2.25), s2 = 1 / std::sqrt(1.25);
  const Tensor adj = Tensor::matrix({{s0 * s0, s0 * s1, 0}, {s1 * s0, s1 * s1, 0.25 * s1 * s2}, {0, 0.25 * s2 * s1, s2 * s2}});
  Tensor expected = Tensor::zeros(3, 2);
  const Tensor *fusions[2] = {&f0, &f1};
  for (std::size_t ch = 0; ch < 2; ++ch) {
    Tensor xi = Tensor::zeros(3, 1);
    for (std::size_t i = 0; i < 3; ++i) xi(i, 0) = x(i, ch);
    const Tensor h = relu_of(naive_matmul(naive_matmul(adj, xi), w));
    for (std::size_t k = 0; k < h.size(); ++k) expected[k] += (*fusions[ch])[k] * h[k];
  }

  const Tensor a_g = build_local_adjacency(GraphSpec{3, {{0, 1, 1.0}, {1, 2, 4.0}}, false});
  Tape tape;
  const NodeId out = cgcn_forward(tape, tape.constant(x), tape.constant(normalize_adjacency(a_g, true)), ps, c,
                                  View::Local);
  EXPECT_LT(max_abs_diff(tape.value(out), expected), 1e-14);
}

TEST(Cgcn, ChannelCountMismatch) {
  ModelConfig c = tiny_config(3, 2);
  ParamStore ps = init_params(c, 2);
  Tape tape;
  EXPECT_THROW(cgcn_forward(tape, tape.constant(Tensor::zeros(3, 3)), tape.constant(Tensor::identity(3)), ps, c,
                            View::Local),
               DimensionError);
}

TEST(ChannelFuse, Cases) {
  Tape tape;
  const NodeId h1 = tape.constant(Tensor::matrix({{5}})), h2 = tape.constant(Tensor::matrix({{7}}));
  const NodeId w1 = tape.constant(Tensor::matrix({{2}})), w2 = tape.constant(Tensor::matrix({{3}}));
  const NodeId zero = tape.constant(Tensor::matrix({{0}}));
  const NodeId one = tape.constant(Tensor::matrix({{1}}));
  std::vector<NodeId> hs{h1, h2}, ws{w1, w2}, zs{zero, zero};
  EXPECT_EQ(tape.value(channel_fuse(tape, hs, ws))[0], 31.0);
  EXPECT_EQ(tape.value(channel_fuse(tape, hs, zs))[0], 0.0);
  std::vector<NodeId> single{h1}, ones{one};
  EXPECT_EQ(tape.value(channel_fuse(tape, single, ones))[0], 5.0);
  std::vector<NodeId> bad{tape.constant(Tensor::zeros(1, 2))};
  EXPECT_THROW(channel_fuse(tape, single, bad), DimensionError);
  EXPECT_THROW(channel_fuse(tape, hs, ones), DimensionError);
}

TEST(MultiviewFuse, Cases) {
  Rng rng(4);
  const Tensor hg = random_tensor(rng, 3, 2);
  Tensor neg = hg;
  for (double &v : neg.data()) v = -v;
  Tape tape;
  const NodeId g = tape.constant(hg);
  EXPECT_EQ(tape.value(multiview_fuse(tape, g, tape.constant(Tensor::zeros(3, 2)))), hg);
  EXPECT_EQ(tape.value(multiview_fuse(tape, g, tape.constant(neg))), Tensor::zeros(3, 2));
  EXPECT_EQ(multiview_fuse(tape, g, std::nullopt), g);
  EXPECT_THROW(multiview_fuse(tape, g, tape.constant(Tensor::zeros(2, 2))), DimensionError);
}

namespace {

// Direct transcription of the LSTM gate equations, one node (row) at a time.
struct LstmOracle {
  static double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  static void step(const ParamStore &ps, std::size_t layer, const Tensor &x, Tensor &h, Tensor &c) {
    const std::size_t hid = h.cols(), in = x.cols();
    auto w = [&](const char *n) -> const Tensor & { return ps.get(param_names::lstm(layer, n)).value; };
    Tensor h_new = h, c_new = c;
    for (std::size_t node = 0; node < x.rows(); ++node) {
      std::vector<double> z(hid + in);
      for (std::size_t k = 0; k < hid; ++k) z[k] = h(node, k);
      for (std::size_t k = 0; k < in; ++k) z[hid + k] = x(node, k);
      for (std::size_t j = 0; j < hid; ++j) {
        double pf = w("b_f")[j], pi = w("b_i")[j], pc = w("b_c")[j], po = w("b_o")[j];
        for (std::size_t k = 0; k < z.size(); ++k) {
          pf += w("W_f")(k, j) * z[k];
          pi += w("W_i")(k, j) * z[k];
          pc += w("W_c")(k, j) * z[k];
          po += w("W_o")(k, j) * z[k];
        }
        const double cj = sig(pf) * c(node, j) + sig(pi) * std::tanh(pc);
        c_new(node, j) = cj;
        h_new(node, j) = sig(po) * std::tanh(cj);
      }
    }
    h = h_new;
    c = c_new;
  }
};

}  // namespace

TEST(LstmCell, ZeroWeightsClosedForm) {
  ModelConfig c = tiny_config(3, 2);
  ParamStore ps = init_params(c, 1);
  for (auto &p : ps)
    if (p.name.rfind("lstm.", 0) == 0) p.value.fill(0.0);
  Rng rng(5);
  const Tensor x = random_tensor(rng, 3, c.feature_dim());
  const Tensor c_prev = random_tensor(rng, 3, c.lstm_hidden);
  Tape tape;
  const LstmState s = lstm_cell(tape, tape.constant(x), {tape.constant(random_tensor(rng, 3, c.lstm_hidden)),
                                                         tape.constant(c_prev)},
                                ps, 0);
  for (std::size_t k = 0; k < c_prev.size(); ++k) {
    const double ct = 0.5 * c_prev[k];
    EXPECT_DOUBLE_EQ(tape.value(s.c)[k], ct);
    EXPECT_DOUBLE_EQ(tape.value(s.h)[k], 0.5 * std::tanh(ct));
  }
}

TEST(LstmCell, ZeroInputZeroStateZeroBiasIsFixedPoint) {
  ModelConfig c = tiny_config(3, 2);
  ParamStore ps = init_params(c, 1);
  for (const char *b : {"b_f", "b_i", "b_c", "b_o"}) ps.get(param_names::lstm(0, b)).value.fill(0.0);
  Tape tape;
  const LstmState s = lstm_cell(tape, tape.constant(Tensor::zeros(3, c.feature_dim())),
                                {tape.constant(Tensor::zeros(3, 5)), tape.constant(Tensor::zeros(3, 5))}, ps, 0);
  EXPECT_EQ(tape.value(s.h), Tensor::zeros(3, 5));
}

TEST(LstmCell, MatchesIndependentTranscription) {
  Rng rng(6);
  ModelConfig c = tiny_config(2, 2);
  c.lstm_layers = 2;
  ParamStore ps = init_params(c, 77);
  for (auto &p : ps)
    if (p.name.rfind("lstm.", 0) == 0)
      for (double &v : p.value.data()) v = rng.uniform(-1.0, 1.0);
  const Tensor x = random_tensor(rng, 2, c.feature_dim());
  Tensor h0 = random_tensor(rng, 2, 5), c0 = random_tensor(rng, 2, 5);
  Tensor h1 = random_tensor(rng, 2, 5), c1 = random_tensor(rng, 2, 5);

  Tape tape;
  const LstmState s0 = lstm_cell(tape, tape.constant(x), {tape.constant(h0), tape.constant(c0)}, ps, 0);
  const LstmState s1 = lstm_cell(tape, s0.h, {tape.constant(h1), tape.constant(c1)}, ps, 1);

  LstmOracle::step(ps, 0, x, h0, c0);
  LstmOracle::step(ps, 1, h0, h1, c1);
  EXPECT_LT(max_abs_diff(tape.value(s0.h), h0), 1e-12);
  EXPECT_LT(max_abs_diff(tape.value(s0.c), c0), 1e-12);
  EXPECT_LT(max_abs_diff(tape.value(s1.h), h1), 1e-12);
  EXPECT_LT(max_abs_diff(tape.value(s1.c), c1), 1e-12);
}

TEST(LstmCell, ShapeMismatch) {
  ModelConfig c = tiny_config(2, 2);
  ParamStore ps = init_params(c, 1);
  Tape tape;
  EXPECT_THROW(lstm_cell(tape, tape.constant(Tensor::zeros(2, c.feature_dim() + 1)),
                         {tape.constant(Tensor::zeros(2, 5)), tape.constant(Tensor::zeros(2, 5))}, ps, 0),
               DimensionError);
}

TEST(ExternalEncode, ZeroWeightsGiveBias) {
  ModelConfig c = tiny_config();
  ParamStore ps = init_params(c, 1);
  ps.get(param_names::external_weight).value.fill(0.0);
  Rng rng(2);
  const Tensor raw = random_external(rng, c).reshaped({1, c.external.width()});
  {
    Tape tape;
    EXPECT_EQ(tape.value(external_encode(tape, tape.constant(raw), ps, c)), Tensor::zeros(1, c.external_hidden));
  }
  ps.get(param_names::external_bias).value = Tensor::matrix({{0.25, 1.5, 3.0}});
  Tape tape;
  EXPECT_EQ(tape.value(external_encode(tape, tape.constant(raw), ps, c)), Tensor::matrix({{0.25, 1.5, 3.0}}));
}

TEST(ExternalEncode, DeterministicAndSensitiveToDayType) {
  ModelConfig c = tiny_config();
  c.external_hidden = 8;
  Rng rng(10);
  int changed = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ParamStore ps = init_params(c, 100 + trial);
    ps.get(param_names::external_bias).value.fill(0.5);
    Tensor raw = random_external(rng, c).reshaped({1, c.external.width()});
    Tape tape;
    const Tensor a = tape.value(external_encode(tape, tape.constant(raw), ps, c));
    const Tensor b = tape.value(external_encode(tape, tape.constant(raw), ps, c));
    EXPECT_EQ(a, b);
    // Move the day-type hot bit to another level.
    std::size_t hot = 0;
    while (raw[hot] != 1.0) ++hot;
    raw[hot] = 0.0;
    raw[(hot + 1) % 3] = 1.0;
    const Tensor flipped = tape.value(external_encode(tape, tape.constant(raw), ps, c));
    if (!(flipped == a)) ++changed;
  }
  EXPECT_EQ(changed, 20);
}

TEST(ExternalEncode, EqualEmbeddingRowsMakeFlipInvisible) {
  ModelConfig c = tiny_config();
  ParamStore ps = init_params(c, 1);
  Tensor &table = ps.get(param_names::external_table(0)).value;
  for (std::size_t j = 0; j < table.cols(); ++j) table(1, j) = table(0, j);
  Rng rng(1);
  Tensor raw = random_external(rng, c).reshaped({1, c.external.width()});
  raw[0] = 1.0;
  raw[1] = 0.0;
  raw[2] = 0.0;
  Tape tape;
  const Tensor a = tape.value(external_encode(tape, tape.constant(raw), ps, c));
  raw[0] = 0.0;
  raw[1] = 1.0;
  EXPECT_EQ(tape.value(external_encode(tape, tape.constant(raw), ps, c)), a);
}

TEST(ExternalEncode, InvalidCategoricalRejected) {
  ModelConfig c = tiny_config();
  ParamStore ps = init_params(c, 1);
  Tensor raw = Tensor::zeros(1, c.external.width());
  raw[4] = 1.0;  // weather set, day type missing
  Tape tape;
  EXPECT_THROW(external_encode(tape, tape.constant(raw), ps, c), ValidationError);
  raw[0] = 2.0;
  EXPECT_THROW(external_encode(tape, tape.constant(raw), ps, c), ValidationError);
}

TEST(ModelForward, OutputShapeForSeveralGeometries) {
  Rng rng(1);
  for (std::size_t n : {1, 2, 6}) {
    ModelConfig c = tiny_config(n, 3);
    c.window = 3;
    Model m(c, ring_adjacency(n), 5);
    const Tensor y = m.predict(random_window(rng, c), random_external(rng, c));
    EXPECT_EQ(y.shape(), (Shape{n, 1}));
    EXPECT_TRUE(y.all_finite());
  }
}

TEST(ModelForward, ShapeErrorsNameTheStage) {
  Rng rng(1);
  ModelConfig c = tiny_config();
  Model m(c, ring_adjacency(4), 5);
  ModelConfig wrong = c;
  wrong.window = 3;
  try {
    m.predict(random_window(rng, wrong), random_external(rng, c));
    FAIL();
  } catch (const DimensionError &e) {
    EXPECT_NE(std::string(e.what()).find("model_forward[input]"), std::string::npos);
  }
  try {
    m.predict(random_window(rng, c), Tensor({c.external.width() + 1}));
    FAIL();
  } catch (const DimensionError &e) {
    EXPECT_NE(std::string(e.what()).find("model_forward[external]"), std::string::npos);
  }
  EXPECT_THROW(Model(c, ring_adjacency(5), 1), DimensionError);
}

TEST(ModelForward, AllZeroParametersCollapseToHeadBias) {
  Rng rng(1);
  ModelConfig c = tiny_config();
  Model m(c, ring_adjacency(4), 5);
  for (auto &p : m.params()) p.value.fill(0.0);
  m.params().get(param_names::head_bias).value.fill(0.37);
  const Tensor y = m.predict(random_window(rng, c), random_external(rng, c));
  EXPECT_EQ(y, Tensor::filled(4, 1, 0.37));
}

TEST(ModelForward, BatchRowsMatchSingleSamples) {
  Rng rng(8);
  ModelConfig c = tiny_config();
  Model m(c, ring_adjacency(4), 5);
  std::vector<Tensor> ws, es;
  for (int b = 0; b < 3; ++b) {
    ws.push_back(random_window(rng, c));
    es.push_back(random_external(rng, c));
  }
  std::vector<const Tensor *> wp, ep;
  for (int b = 0; b < 3; ++b) {
    wp.push_back(&ws[b]);
    ep.push_back(&es[b]);
  }
  const Tensor batched = m.predict(make_batch(wp, ep));
  ASSERT_EQ(batched.shape(), (Shape{12, 1}));
  for (std::size_t b = 0; b < 3; ++b) {
    const Tensor single = m.predict(ws[b], es[b]);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(batched[b * 4 + i], single[i], 1e-12);
  }
}

TEST(ModelForward, DeterministicAndHiddenStateBounded) {
  Rng rng(2);
  ModelConfig c = tiny_config(5, 3);
  c.lstm_layers = 2;
  c.window = 4;
  Model m(c, ring_adjacency(5), 11);
  for (auto &p : m.params())
    for (double &v : p.value.data()) v *= 3.0;  // push gates toward saturation
  const Tensor w = random_window(rng, c), e = random_external(rng, c);
  const Batch batch = make_batch(w, e);
  Tape t1, t2;
  ForwardTrace trace;
  const NodeId y1 = m.forward(t1, batch, &trace);
  const NodeId y2 = m.forward(t2, batch);
  EXPECT_EQ(t1.value(y1), t2.value(y2));
  ASSERT_EQ(trace.hidden.size(), c.window * c.lstm_layers);
  for (NodeId h : trace.hidden)
    for (double v : t1.value(h).values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
}

TEST(ModelGradient, FullModelMatchesFiniteDifferencesAndHasNoDeadBranches) {
  Rng rng(31);
  ModelConfig c = tiny_config(4, 2);
  GraphSpec g{4, {{0, 1, 1.5}, {1, 2, 0.7}, {2, 3, 2.0}, {0, 2, 3.0}}, false};
  Model m(c, build_local_adjacency(g), 123);
  std::vector<Tensor> ws, es;
  for (int b = 0; b < 2; ++b) {
    ws.push_back(random_window(rng, c));
    es.push_back(random_external(rng, c));
  }
  std::vector<const Tensor *> wp{&ws[0], &ws[1]}, ep{&es[0], &es[1]};
  const Batch batch = make_batch(wp, ep);
  const Tensor target = random_tensor(rng, 8, 1, 0.0, 1.0);
  auto build = [&](Tape &t) { return t.mse_loss(m.forward(t, batch), t.constant(target), 2); };

  const auto res = grad_check(build, m.params(), 1e-6, 1e-4);
  EXPECT_LT(res.max_relative_error, 1e-4) << res.worst_parameter << "[" << res.worst_index << "]";

  m.params().zero_grad();
  Tape tape;
  tape.backward(build(tape));
  for (const auto &p : m.params()) EXPECT_GT(p.grad.max_abs(), 0.0) << p.name;
}

TEST(ModelAblation, LocalOnlyIgnoresNodeEmbedding) {
  Rng rng(5);
  ModelConfig c = tiny_config(4, 2, Ablation::LocalOnly);
  Model a(c, ring_adjacency(4), 3);
  Model b = a;
  for (double &v : b.params().get(param_names::node_embedding).value.data()) v = rng.uniform(-5, 5);
  const Batch batch = make_batch(random_window(rng, c), random_external(rng, c));
  const Tensor target = random_tensor(rng, 4, 1);
  Tape ta, tb;
  ta.backward(ta.mse_loss(a.forward(ta, batch), ta.constant(target)));
  tb.backward(tb.mse_loss(b.forward(tb, batch), tb.constant(target)));
  EXPECT_EQ(ta.value(ta.size() - 1), tb.value(tb.size() - 1));
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params()[i].grad, b.params()[i].grad) << a.params()[i].name;
  }
  EXPECT_EQ(a.params().get(param_names::node_embedding).grad.max_abs(), 0.0);
}

TEST(ModelAblation, GlobalOnlyIgnoresEdgeList) {
  Rng rng(6);
  ModelConfig c = tiny_config(4, 2, Ablation::GlobalOnly);
  Model a(c, ring_adjacency(4), 3);
  Model b(c, Tensor::zeros(4, 4), 3);
  const Batch batch = make_batch(random_window(rng, c), random_external(rng, c));
  const Tensor target = random_tensor(rng, 4, 1);
  Tape ta, tb;
  ta.backward(ta.mse_loss(a.forward(ta, batch), ta.constant(target)));
  tb.backward(tb.mse_loss(b.forward(tb, batch), tb.constant(target)));
  EXPECT_EQ(ta.value(ta.size() - 1), tb.value(tb.size() - 1));
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].grad, b.params()[i].grad);
}

TEST(ModelAblation, SingleChannelUnitFusionEqualsJointGcn) {
  Rng rng(7);
  ModelConfig full = tiny_config(4, 1, Ablation::Full);
  ModelConfig joint = tiny_config(4, 1, Ablation::NoChannelwise);
  Model a(full, ring_adjacency(4), 21);
  Model b(joint, ring_adjacency(4), 21);
  for (View v : {View::Local, View::Global}) a.params().get(param_names::fusion(v, 0)).value.fill(1.0);
  for (auto &p : b.params()) p.value = a.params().get(p.name).value;
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor w = random_window(rng, full), e = random_external(rng, full);
    EXPECT_LT(max_abs_diff(a.predict(w, e), b.predict(w, e)), 1e-12);
  }
}

TEST(ModelConfigTest, ValidationAndAblationNames) {
  ModelConfig c = tiny_config();
  c.gcn_dims.clear();
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config();
  c.window = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  for (const char *name : {"full", "local-only", "global-only", "no-channelwise", "local-no-channelwise"})
    EXPECT_EQ(to_string(parse_ablation(name)), name);
  EXPECT_THROW(parse_ablation("bogus"), ValidationError);

  nlohmann::json j = tiny_config(7, 3, Ablation::GlobalOnly);
  EXPECT_EQ(j.get<ModelConfig>(), tiny_config(7, 3, Ablation::GlobalOnly));
}
