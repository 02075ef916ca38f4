// urr: relational scoring, arc classification, graph shape, rgcn oracles.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "dialgraph/grad_check.hpp"
#include "dialgraph/urr.hpp"
#include "doctest.h"

using namespace dialgraph;

namespace {

struct TestRng {
  std::uint64_t state;
  explicit TestRng(std::uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ULL) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
  Mat mat(Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 2.0 * uniform() - 1.0;
    return m;
  }
};

RelationalAttentionParams make_attn(ParameterStore& store, int d, int n, int T) {
  RelationalAttentionParams p;
  p.wq = store.create("urr.attn.wq", n, d, Init::XavierUniform);
  p.wk = store.create("urr.attn.wk", n, d, Init::XavierUniform);
  p.wv = store.create("urr.attn.wv", n, d, Init::XavierUniform);
  p.mlp_w1 = store.create("urr.mlp.w1", n, n, Init::XavierUniform);
  p.mlp_b1 = store.create("urr.mlp.b1", 1, n, Init::Zeros);
  p.mlp_w2 = store.create("urr.mlp.w2", n, T, Init::XavierUniform);
  p.mlp_b2 = store.create("urr.mlp.b2", 1, T, Init::Zeros);
  return p;
}

// Independent dense implementation of one graph-conv step with plain Eigen.
Mat dense_rgcn_oracle(const Mat& h, const std::vector<Arc>& arcs, const Mat& weights,
                      const Mat& self, const std::vector<Mat>& rel) {
  Eigen::Index n = h.rows();
  Mat total = h * self.transpose();
  for (std::size_t r = 0; r < rel.size(); ++r) {
    Mat adj = Mat::Zero(n, n);
    for (std::size_t a = 0; a < arcs.size(); ++a)
      adj(arcs[a].dst, arcs[a].src) += weights(static_cast<Eigen::Index>(a),
                                               static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < n; ++i) {
      double mass = adj.row(i).sum();
      if (mass != 0.0) adj.row(i) /= mass;
    }
    total += adj * h * rel[r].transpose();
  }
  return total.cwiseMax(0.0);
}

}  // namespace

TEST_CASE("relational_scores closed forms") {
  // all projections zero -> zero vector
  {
    ParameterStore store(0);
    RelationalAttentionParams p = make_attn(store, 4, 3, 2);
    p.wq.value_mut().setZero();
    p.wk.value_mut().setZero();
    p.wv.value_mut().setZero();
    Tensor z = relational_scores(Tensor::constant(Mat::Random(1, 4)),
                                 Tensor::constant(Mat::Random(1, 4)), p);
    CHECK(z.value() == Mat::Zero(1, 3));
  }
  // n = 1, unit projections and unit inputs at d = 4: z = 1*1/sqrt(4)*1 = 0.5
  {
    ParameterStore store(0);
    RelationalAttentionParams p = make_attn(store, 4, 1, 2);
    Mat e1 = Mat::Zero(1, 4);
    e1(0, 0) = 1.0;
    p.wq.value_mut() = e1;
    p.wk.value_mut() = e1;
    p.wv.value_mut() = e1;
    Tensor z = relational_scores(Tensor::constant(e1), Tensor::constant(e1), p);
    CHECK(z.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("relational_scores matches the scalar loop oracle") {
  const int d = 8, n = 4;
  ParameterStore store(2);
  RelationalAttentionParams p = make_attn(store, d, n, 3);
  TestRng rng(5);
  Mat hs = rng.mat(1, d), he = rng.mat(1, d);

  Mat got = relational_scores(Tensor::constant(hs), Tensor::constant(he), p).value();

  double compat = 0.0;
  for (int i = 0; i < n; ++i) {
    double qi = 0.0, ki = 0.0;
    for (int j = 0; j < d; ++j) {
      qi += hs(0, j) * p.wq.value()(i, j);
      ki += he(0, j) * p.wk.value()(i, j);
    }
    compat += qi * ki;
  }
  compat /= std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i) {
    double vi = 0.0;
    for (int j = 0; j < d; ++j) vi += he(0, j) * p.wv.value()(i, j);
    CHECK(std::abs(got(0, i) - compat * vi) < 1e-12);
  }
}

TEST_CASE("classify_arc hard type and tie break") {
  // identity-like MLP at n = T: relu passthrough of a one-hot keeps argmax
  {
    ParameterStore store(0);
    RelationalAttentionParams p = make_attn(store, 4, 4, 4);
    p.mlp_w1.value_mut() = Mat::Identity(4, 4);
    p.mlp_w2.value_mut() = Mat::Identity(4, 4);
    Mat z = Mat::Zero(1, 4);
    z(0, 2) = 1.0;
    ArcTypeResult r = classify_arc(Tensor::constant(z), p);
    CHECK(r.hard_type == 2);
  }
  // zero logits: uniform distribution, lowest-index tie break
  {
    ParameterStore store(1);
    RelationalAttentionParams p = make_attn(store, 4, 4, 5);
    p.mlp_w1.value_mut().setZero();
    p.mlp_w2.value_mut().setZero();
    ArcTypeResult r = classify_arc(Tensor::constant(Mat::Random(1, 4)), p);
    for (double pr : r.probs) CHECK(pr == doctest::Approx(0.2));
    CHECK(r.hard_type == 0);
  }
}

TEST_CASE("classifier distributions normalize and argmax agrees") {
  const int n = 6, T = 4;
  ParameterStore store(3);
  RelationalAttentionParams p = make_attn(store, 8, n, T);
  TestRng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    ArcTypeResult r = classify_arc(Tensor::constant(rng.mat(1, n)), p);
    double s = 0.0;
    for (double pr : r.probs) s += pr;
    CHECK(std::abs(s - 1.0) < 1e-9);
    int best = 0;
    for (int t = 1; t < T; ++t)
      if (r.probs[static_cast<std::size_t>(t)] > r.probs[static_cast<std::size_t>(best)]) best = t;
    CHECK(r.hard_type == best);
  }
}

TEST_CASE("graph shape follows the arc count formula") {
  const int d = 8;
  ParameterStore store(4);
  RelationalAttentionParams p = make_attn(store, d, 4, 3);
  TestRng rng(11);

  auto graph_for = [&](int n_utt) {
    NoGradGuard ng;
    return build_graph(Tensor::constant(rng.mat(n_utt, d)), Tensor::constant(rng.mat(4, d)), p);
  };

  CHECK(graph_for(2).arcs.size() == 10);   // 2*1 + 4*2
  CHECK(graph_for(1).arcs.size() == 4);    // no pair arcs, one per option

  RelationalGraph g5 = graph_for(5);
  CHECK(g5.arcs.size() == 40);
  // every option node receives exactly N arcs, every arc source is an utterance
  std::vector<int> in_deg(static_cast<std::size_t>(g5.n_nodes()), 0);
  for (const auto& arc : g5.arcs) {
    CHECK(arc.src < 5);
    CHECK(arc.src != arc.dst);
    ++in_deg[static_cast<std::size_t>(arc.dst)];
  }
  for (int o = 5; o < 9; ++o) CHECK(in_deg[static_cast<std::size_t>(o)] == 5);

  for (int n_utt = 1; n_utt <= 12; ++n_utt)
    CHECK(static_cast<int>(graph_for(n_utt).arcs.size()) == n_utt * (n_utt - 1) + 4 * n_utt);

  CHECK_THROWS_AS(build_graph(Tensor::constant(Mat(0, d)), Tensor::constant(rng.mat(4, d)), p),
                  ContractError);
}

TEST_CASE("batched graph classification equals the per-pair path") {
  const int d = 8, n = 4, T = 3;
  ParameterStore store(6);
  RelationalAttentionParams p = make_attn(store, d, n, T);
  TestRng rng(21);
  Mat hu = rng.mat(3, d), ho = rng.mat(4, d);

  NoGradGuard ng;
  RelationalGraph g = build_graph(Tensor::constant(hu), Tensor::constant(ho), p);
  Mat all(7, d);
  all << hu, ho;
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    Tensor z = relational_scores(Tensor::constant(Mat(all.row(g.arcs[a].src))),
                                 Tensor::constant(Mat(all.row(g.arcs[a].dst))), p);
    ArcTypeResult single = classify_arc(z, p);
    ArcTypeResult batched = g.arc_result(a);
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(single.z[static_cast<std::size_t>(i)] -
                     batched.z[static_cast<std::size_t>(i)]) < 1e-12);
    for (int t = 0; t < T; ++t)
      CHECK(std::abs(single.probs[static_cast<std::size_t>(t)] -
                     batched.probs[static_cast<std::size_t>(t)]) < 1e-12);
    CHECK(single.hard_type == batched.hard_type);
  }
}

TEST_CASE("rgcn trivial cases") {
  const int d = 3;
  RgcnLayerParams lp;
  lp.self = Tensor::constant(Mat::Identity(d, d));
  lp.rel.push_back(Tensor::constant(Mat::Identity(d, d)));

  // isolated node with identity self transform keeps nonnegative features
  Mat h = (Mat(1, 3) << 0.5, 0.0, 2.0).finished();
  Tensor out = rgcn_layer(Tensor::constant(h), {}, Tensor::constant(Mat(0, 1)), lp);
  CHECK(out.value() == h);

  // one arc, identity relation, zero self: pure message copy
  lp.self = Tensor::constant(Mat::Zero(d, d));
  Mat h2(2, 3);
  h2 << 0.0, 0.0, 0.0, 1.0, 2.0, 3.0;
  std::vector<Arc> arcs = {{1, 0}};  // node1 -> node0
  Mat w(1, 1);
  w << 1.0;
  Tensor out2 = rgcn_layer(Tensor::constant(h2), arcs, Tensor::constant(w), lp);
  CHECK(out2.value().row(0) == h2.row(1));
  CHECK(out2.value().row(1) == Mat::Zero(1, 3));
}

TEST_CASE("rgcn matches the dense adjacency oracle on random graphs") {
  TestRng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    int n_nodes = 2 + rng.below(7);   // up to 8
    int T = 1 + rng.below(4);         // up to 4
    int d = 3 + rng.below(4);
    int n_arcs = 1 + rng.below(2 * n_nodes);

    std::vector<Arc> arcs;
    for (int a = 0; a < n_arcs; ++a) {
      int s = rng.below(n_nodes);
      int e = rng.below(n_nodes - 1);
      if (e >= s) ++e;
      arcs.push_back({s, e});
    }
    Mat h = rng.mat(n_nodes, d);
    RgcnLayerParams lp;
    lp.self = Tensor::constant(rng.mat(d, d));
    std::vector<Mat> rel_mats;
    for (int r = 0; r < T; ++r) {
      rel_mats.push_back(rng.mat(d, d));
      lp.rel.push_back(Tensor::constant(rel_mats.back()));
    }

    // soft mode: random rows normalized to distributions
    Mat soft(n_arcs, T);
    for (int a = 0; a < n_arcs; ++a) {
      double z = 0.0;
      for (int t = 0; t < T; ++t) {
        soft(a, t) = 0.05 + rng.uniform();
        z += soft(a, t);
      }
      soft.row(a) /= z;
    }
    Mat got_soft = rgcn_layer(Tensor::constant(h), arcs, Tensor::constant(soft), lp).value();
    Mat want_soft = dense_rgcn_oracle(h, arcs, soft, lp.self.value(), rel_mats);
    CHECK((got_soft - want_soft).cwiseAbs().maxCoeff() < 1e-10);

    // hard mode: one-hot per arc
    std::vector<int> hard;
    for (int a = 0; a < n_arcs; ++a) hard.push_back(rng.below(T));
    Tensor hard_w = one_hot_weights(hard, T);
    Mat got_hard = rgcn_layer(Tensor::constant(h), arcs, hard_w, lp).value();
    Mat want_hard = dense_rgcn_oracle(h, arcs, hard_w.value(), lp.self.value(), rel_mats);
    CHECK((got_hard - want_hard).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("one relation type degenerates to an untyped graph convolution") {
  TestRng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    int n_nodes = 2 + rng.below(6);
    int d = 4;
    int n_arcs = 1 + rng.below(2 * n_nodes);
    std::vector<Arc> arcs;
    for (int a = 0; a < n_arcs; ++a) {
      int s = rng.below(n_nodes);
      int e = rng.below(n_nodes - 1);
      if (e >= s) ++e;
      arcs.push_back({s, e});
    }
    Mat h = rng.mat(n_nodes, d);
    Mat w_rel = rng.mat(d, d), w_self = rng.mat(d, d);
    RgcnLayerParams lp;
    lp.self = Tensor::constant(w_self);
    lp.rel.push_back(Tensor::constant(w_rel));

    Mat ones = Mat::Ones(n_arcs, 1);
    Mat got = rgcn_layer(Tensor::constant(h), arcs, Tensor::constant(ones), lp).value();

    // untyped GCN oracle: in-degree normalized adjacency
    Mat adj = Mat::Zero(n_nodes, n_nodes);
    for (const auto& a : arcs) adj(a.dst, a.src) += 1.0;
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
      double deg = adj.row(i).sum();
      if (deg > 0) adj.row(i) /= deg;
    }
    Mat want = (adj * h * w_rel.transpose() + h * w_self.transpose()).cwiseMax(0.0);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("soft output converges to hard output as types sharpen") {
  TestRng rng(51);
  const int n_nodes = 6, d = 4, T = 3;
  std::vector<Arc> arcs;
  for (int s = 0; s < 4; ++s)
    for (int e = 0; e < n_nodes; ++e)
      if (e != s) arcs.push_back({s, e});
  int n_arcs = static_cast<int>(arcs.size());

  Mat h = rng.mat(n_nodes, d);
  RgcnLayerParams lp;
  lp.self = Tensor::constant(rng.mat(d, d));
  for (int r = 0; r < T; ++r) lp.rel.push_back(Tensor::constant(rng.mat(d, d)));

  Mat logits = rng.mat(n_arcs, T);
  std::vector<int> hard;
  for (int a = 0; a < n_arcs; ++a) {
    int best = 0;
    for (int t = 1; t < T; ++t)
      if (logits(a, t) > logits(a, best)) best = t;
    // an O(1) gap: at tau = 1e-3 every non-argmax weight underflows to an
    // exact zero, so the soft pass skips exactly what the hard pass skips
    logits(a, best) += 1.0;
    hard.push_back(best);
  }

  double tau = 1e-3;
  Mat sharp(n_arcs, T);
  for (int a = 0; a < n_arcs; ++a) {
    double mx = logits.row(a).maxCoeff();
    double z = 0.0;
    for (int t = 0; t < T; ++t) {
      sharp(a, t) = std::exp((logits(a, t) - mx) / tau);
      z += sharp(a, t);
    }
    sharp.row(a) /= z;
  }

  Mat soft_out = rgcn_layer(Tensor::constant(h), arcs, Tensor::constant(sharp), lp).value();
  Mat hard_out = rgcn_layer(Tensor::constant(h), arcs, one_hot_weights(hard, T), lp).value();
  CHECK((soft_out - hard_out).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("hard mode ignores argmax-preserving classifier changes") {
  UrrConfig cfg;
  cfg.d = 8;
  cfg.projections = 4;
  cfg.arc_types = 3;
  cfg.layers = 2;
  cfg.mode = ArcMode::Hard;
  ParameterStore store(61);
  UrrParams params = create_urr_params(store, cfg);
  TestRng rng(61);
  Mat hu = rng.mat(3, 8), ho = rng.mat(4, 8);

  NoGradGuard ng;
  UrrOutput base = urr_forward(Tensor::constant(hu), Tensor::constant(ho), params, cfg);
  store.get("urr.mlp.b2").value_mut().array() += 1e-9;  // keeps every argmax
  UrrOutput tweaked = urr_forward(Tensor::constant(hu), Tensor::constant(ho), params, cfg);
  CHECK(base.graph.hard_types == tweaked.graph.hard_types);
  CHECK(base.options.value() == tweaked.options.value());
  CHECK(base.utterances.value() == tweaked.utterances.value());
}

TEST_CASE("urr_forward with one layer equals a single rgcn step") {
  UrrConfig cfg;
  cfg.d = 8;
  cfg.projections = 4;
  cfg.arc_types = 3;
  cfg.layers = 1;
  ParameterStore store(71);
  UrrParams params = create_urr_params(store, cfg);
  TestRng rng(71);
  Mat hu = rng.mat(2, 8), ho = rng.mat(4, 8);

  NoGradGuard ng;
  UrrOutput out = urr_forward(Tensor::constant(hu), Tensor::constant(ho), params, cfg);
  RelationalGraph g = build_graph(Tensor::constant(hu), Tensor::constant(ho), params.attn);
  Tensor step = rgcn_layer(g.nodes, g.arcs, g.probs_all, params.layers[0]);
  CHECK(out.options.value() == step.value().bottomRows(4));
  CHECK(out.utterances.value() == step.value().topRows(2));
}

TEST_CASE("soft mode sends gradient into every relational parameter") {
  UrrConfig cfg;
  cfg.d = 6;
  cfg.projections = 3;
  cfg.arc_types = 2;
  cfg.layers = 2;
  ParameterStore store(81);
  UrrParams params = create_urr_params(store, cfg);
  TestRng rng(81);
  Tensor hu = Tensor::constant(rng.mat(3, 6));
  Tensor ho = Tensor::constant(rng.mat(4, 6));

  store.zero_grads();
  UrrOutput out = urr_forward(hu, ho, params, cfg);
  backward(mean(mul(out.options, out.options)));
  for (const auto& name : store.names()) {
    INFO(name);
    CHECK(store.get(name).grad().cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("gradients through urr match finite differences") {
  UrrConfig cfg;
  cfg.d = 6;
  cfg.projections = 3;
  cfg.arc_types = 2;
  cfg.layers = 2;
  ParameterStore store(91);
  UrrParams params = create_urr_params(store, cfg);
  TestRng rng(91);
  Mat hu = rng.mat(3, 6), ho = rng.mat(4, 6);

  auto fn = [&]() {
    UrrOutput out = urr_forward(Tensor::constant(hu), Tensor::constant(ho), params, cfg);
    return mean(mul(out.options, out.options));
  };
  GradCheckResult r = finite_diff_check(fn, store, 1e-5);
  INFO(r.worst_param);
  CHECK(r.max_rel_error < 1e-4);
}
