// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "../support.hpp"
#include "svodrive/error.hpp"
#include "svodrive/nn/layers.hpp"
#include "svodrive/nn/params.hpp"
#include "svodrive/nn/tensor.hpp"

using namespace svo;
using namespace svo::nn;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

using OpFn = std::function<Var(Tape&, std::vector<Var>&)>;

/// Largest relative error between backward() and central differences over every input entry.
double op_gradient_error(const OpFn& fn, std::vector<Matrix> inputs, double h = 1e-6) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (auto& m : inputs) vars.push_back(tape.variable(m));
    tape.backward(sum(fn(tape, vars)));
    for (auto& v : vars) analytic.push_back(v.grad());
  }
  auto eval = [&](std::vector<Matrix>& in) {
    Tape tape;
    std::vector<Var> vars;
    for (auto& m : in) vars.push_back(tape.constant(m));
    return sum(fn(tape, vars)).value()(0, 0);
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k].data()[i];
      inputs[k].data()[i] = orig + h;
      const double up = eval(inputs);
      inputs[k].data()[i] = orig - h;
      const double down = eval(inputs);
      inputs[k].data()[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double a = analytic[k].data()[i];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
    }
  return worst;
}

class Primitives : public ::testing::Test {
 protected:
  std::mt19937_64 rng{21};
  Matrix a = random_matrix(3, 4, rng);
  Matrix b = random_matrix(4, 2, rng);
  Matrix c = random_matrix(3, 4, rng);
  Matrix row = random_matrix(1, 4, rng);
};

TEST_F(Primitives, LinearAlgebra) {
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return matmul(v[0], v[1]); }, {a, b}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return add(v[0], v[1]); }, {a, c}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return sub(v[0], v[1]); }, {a, c}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return mul(v[0], v[1]); }, {a, c}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return scale(v[0], -2.5); }, {a}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return add_scalar(square(v[0]), 1.5); }, {a}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return add_row(v[0], v[1]); }, {a, row}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return matmul(sum_cols(v[1]), mean(v[0])); }, {row, a}), 1e-6);
}

TEST_F(Primitives, Elementwise) {
  const Matrix pos = a.array().abs() + 0.5;
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return relu(mul(v[0], v[1])); }, {a, c}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return tanh(v[0]); }, {a}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return exp(v[0]); }, {a}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return log(v[0]); }, {pos}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return square(v[0]); }, {a}), 1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return mul(clamp(v[0], -0.5, 0.5), v[1]); }, {a, c}), 1e-6);
}

TEST_F(Primitives, Structural) {
  Segments seg;
  seg.push(2);
  seg.push(1);
  const std::vector<int> rows{2, 0, 0, 1};
  EXPECT_LT(op_gradient_error([&](Tape&, auto& v) { return mul(segment_sum(v[0], seg), segment_sum(v[1], seg)); },
                              {a, c}),
            1e-6);
  EXPECT_LT(op_gradient_error([&](Tape&, auto& v) { return square(gather_rows(v[0], rows)); }, {a}), 1e-6);
  EXPECT_LT(op_gradient_error(
                [](Tape&, auto& v) {
                  std::vector<Var> parts{v[0], v[1]};
                  return square(concat_cols(parts));
                },
                {a, c}),
            1e-6);
  EXPECT_LT(op_gradient_error(
                [](Tape&, auto& v) {
                  std::vector<Var> parts{v[0], v[1]};
                  return square(concat_rows(parts));
                },
                {a, c}),
            1e-6);
  EXPECT_LT(op_gradient_error([](Tape&, auto& v) { return square(slice_cols(v[0], 1, 2)); }, {a}), 1e-6);
}

TEST_F(Primitives, Attention) {
  const Matrix q = random_matrix(2, 4, rng), k = random_matrix(5, 4, rng), v = random_matrix(5, 4, rng);
  const Matrix w = random_matrix(2, 4, rng);
  EXPECT_LT(op_gradient_error([&](Tape& t, auto& x) { return mul(attention(x[0], x[1], x[2]), t.constant(w)); },
                              {q, k, v}),
            1e-6);
  Segments qs, ks;
  qs.push(1);
  qs.push(1);
  ks.push(3);
  ks.push(2);
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 1};
  EXPECT_LT(op_gradient_error(
                [&](Tape& t, auto& x) { return mul(segmented_attention(x[0], x[1], x[2], qs, ks, 2, mask), t.constant(w)); },
                {q, k, v}),
            1e-6);
}

TEST(Backward, SumOfSquares) {
  Tape tape;
  Matrix x(1, 3);
  x << 1.0, -2.0, 0.5;
  Var v = tape.variable(x);
  tape.backward(sum(square(v)));
  EXPECT_EQ(v.grad(), 2.0 * x);
}

TEST(Backward, DetachedBranchHasNoGradient) {
  Tape tape;
  Matrix x(1, 2);
  x << 3.0, 4.0;
  Var v = tape.variable(x);
  tape.backward(add(sum(v), sum(square(detach(v)))));
  EXPECT_EQ(v.grad(), Matrix::Ones(1, 2));
}

TEST(Backward, NonScalarRootRejected) {
  Tape tape;
  Var v = tape.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(tape.backward(v), StructuralError);
}

TEST(Backward, UnreachableParameterGetsZero) {
  ParamStore store(1);
  Linear used(store, "used", 2, 1);
  Linear unused(store, "unused", 2, 1);
  store.at("unused.w").grad = Matrix::Constant(2, 1, 7.0);
  Tape tape;
  Var out = used.forward(tape, store, tape.constant(Matrix::Ones(1, 2)));
  backward(tape, sum(out), store);
  EXPECT_TRUE(store.at("unused.w").grad.isZero());
  EXPECT_FALSE(store.at("used.w").grad.isZero());
}

TEST(Mlp, ZeroWeightsGiveZero) {
  ParamStore store(2);
  Mlp mlp(store, "m", {3, 5, 2});
  for (auto& [_, p] : store.entries()) p.value.setZero();
  Tape tape;
  std::mt19937_64 rng(1);
  EXPECT_TRUE(mlp.forward(tape, store, tape.constant(random_matrix(4, 3, rng))).value().isZero());
}

TEST(Mlp, IdentityLayer) {
  ParamStore store(3);
  Linear lin(store, "id", 3, 3);
  store.at("id.w").value = Matrix::Identity(3, 3);
  store.at("id.b").value.setZero();
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(5, 3, rng);
  Tape tape;
  EXPECT_EQ(lin.forward(tape, store, tape.constant(x)).value(), x);
}

TEST(Mlp, MatchesLoopImplementation) {
  ParamStore store(4);
  Mlp mlp(store, "m", {4, 6, 3}, Activation::Relu, Activation::Tanh);
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(7, 4, rng);
  Tape tape;
  const Matrix y = mlp.forward(tape, store, tape.constant(x)).value();
  const auto& w0 = store.at("m.0.w").value;
  const auto& b0 = store.at("m.0.b").value;
  const auto& w1 = store.at("m.1.w").value;
  const auto& b1 = store.at("m.1.b").value;
  for (int r = 0; r < 7; ++r) {
    std::vector<double> h(6);
    for (int j = 0; j < 6; ++j) {
      double s = b0(0, j);
      for (int i = 0; i < 4; ++i) s += x(r, i) * w0(i, j);
      h[static_cast<std::size_t>(j)] = std::max(0.0, s);
    }
    for (int j = 0; j < 3; ++j) {
      double s = b1(0, j);
      for (int i = 0; i < 6; ++i) s += h[static_cast<std::size_t>(i)] * w1(i, j);
      EXPECT_NEAR(y(r, j), std::tanh(s), 1e-9);
    }
  }
}

TEST(Mlp, WidthMismatchRejected) {
  ParamStore store(5);
  Mlp mlp(store, "m", {4, 2});
  Tape tape;
  EXPECT_THROW(mlp.forward(tape, store, tape.constant(Matrix::Ones(1, 3))), StructuralError);
}

class DeepSet : public ::testing::Test {
 protected:
  DeepSet() : store(6), enc(store, "ds", {5, {16, 16}, {16}, 8}) {}
  Matrix encode(const Matrix& points) {
    Tape tape;
    return enc.forward(tape, store, tape.constant(points), Segments::single(static_cast<int>(points.rows()))).value();
  }
  ParamStore store;
  DeepSetEncoder enc;
  std::mt19937_64 rng{7};
};

TEST_F(DeepSet, PermutationInvariant) {
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix pts = random_matrix(1 + trial % 12, 5, rng);
    const Matrix base = encode(pts);
    std::vector<int> order(static_cast<std::size_t>(pts.rows()));
    std::iota(order.begin(), order.end(), 0);
    for (int p = 0; p < 10; ++p) {
      std::shuffle(order.begin(), order.end(), rng);
      Matrix perm(pts.rows(), pts.cols());
      for (Eigen::Index r = 0; r < pts.rows(); ++r) perm.row(r) = pts.row(order[static_cast<std::size_t>(r)]);
      EXPECT_LT((encode(perm) - base).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST_F(DeepSet, SinglePointIsRhoOfPhi) {
  const Matrix pt = random_matrix(1, 5, rng);
  ParamStore s2(6);
  Mlp phi(s2, "ds.phi", {5, 16, 16}, Activation::Relu, Activation::Relu);
  Mlp rho(s2, "ds.rho", {16, 16, 8});
  s2.copy_values_from(store);
  Tape tape;
  const Matrix direct = rho.forward(tape, s2, phi.forward(tape, s2, tape.constant(pt))).value();
  EXPECT_LT((encode(pt) - direct).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(DeepSet, DuplicatedPointDoublesItsContribution) {
  const Matrix pts = random_matrix(3, 5, rng);
  Matrix dup(4, 5);
  dup << pts, pts.row(1);
  ParamStore s2(6);
  Mlp phi(s2, "ds.phi", {5, 16, 16}, Activation::Relu, Activation::Relu);
  Mlp rho(s2, "ds.rho", {16, 16, 8});
  s2.copy_values_from(store);
  Tape tape;
  const Matrix f = phi.forward(tape, s2, tape.constant(pts)).value();
  const Matrix pooled = f.colwise().sum() + f.row(1);
  const Matrix expect = rho.forward(tape, s2, tape.constant(pooled)).value();
  EXPECT_LT((encode(dup) - expect).cwiseAbs().maxCoeff(), 1e-9);
}

TEST_F(DeepSet, EmptyElementRejected) {
  Segments seg;
  seg.push(2);
  seg.push(0);
  Tape tape;
  EXPECT_THROW(enc.forward(tape, store, tape.constant(random_matrix(2, 5, rng)), seg), StructuralError);
}

TEST_F(DeepSet, SegmentsEncodeIndependently) {
  const Matrix a = random_matrix(3, 5, rng), b = random_matrix(2, 5, rng);
  Matrix both(5, 5);
  both << a, b;
  Segments seg;
  seg.push(3);
  seg.push(2);
  Tape tape;
  const Matrix out = enc.forward(tape, store, tape.constant(both), seg).value();
  EXPECT_LT((out.row(0) - encode(a)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((out.row(1) - encode(b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, SingleKeyReturnsValue) {
  std::mt19937_64 rng(8);
  Tape tape;
  const Matrix v = random_matrix(1, 6, rng);
  const Matrix out = attention(tape.constant(random_matrix(3, 4, rng)), tape.constant(random_matrix(1, 4, rng)),
                               tape.constant(v))
                         .value();
  for (int r = 0; r < 3; ++r) EXPECT_EQ(out.row(r), v);
}

TEST(Attention, EqualScoresAverageValues) {
  std::mt19937_64 rng(9);
  Matrix q = Matrix::Zero(2, 4);
  q(0, 0) = 1.0;
  q(1, 0) = -2.0;
  Matrix k = random_matrix(5, 4, rng);
  k.col(0).setZero();
  const Matrix v = random_matrix(5, 3, rng);
  Tape tape;
  const Matrix out = attention(tape.constant(q), tape.constant(k), tape.constant(v)).value();
  const Matrix mean = v.colwise().mean();
  for (int r = 0; r < 2; ++r) EXPECT_LT((out.row(r) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 100; ++t) {
    const Matrix p = softmax_rows(random_matrix(4, 9, rng, 10.0));
    for (int r = 0; r < 4; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(Attention, MaskedKeysGetZeroWeight) {
  std::mt19937_64 rng(11);
  const Matrix q = random_matrix(2, 4, rng), k = random_matrix(3, 4, rng);
  Matrix v = random_matrix(3, 2, rng);
  const std::vector<std::uint8_t> mask{1, 0, 1};
  Tape tape;
  const Matrix a = attention(tape.constant(q), tape.constant(k), tape.constant(v), mask).value();
  v.row(1) *= 1000.0;
  const Matrix b = attention(tape.constant(q), tape.constant(k), tape.constant(v), mask).value();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Attention, QueryWithoutVisibleKeysIsZero) {
  std::mt19937_64 rng(12);
  Segments qs, ks;
  qs.push(1);
  qs.push(1);
  ks.push(2);
  ks.push(0);
  Tape tape;
  const Matrix out = segmented_attention(tape.constant(random_matrix(2, 4, rng)), tape.constant(random_matrix(2, 4, rng)),
                                         tape.constant(random_matrix(2, 4, rng)), qs, ks, 2)
                         .value();
  EXPECT_TRUE(out.row(1).isZero());
  EXPECT_FALSE(out.row(0).isZero());
}

TEST(Attention, DimensionMismatchRejected) {
  std::mt19937_64 rng(13);
  Tape tape;
  EXPECT_THROW(attention(tape.constant(random_matrix(2, 4, rng)), tape.constant(random_matrix(3, 5, rng)),
                         tape.constant(random_matrix(3, 2, rng))),
               StructuralError);
  EXPECT_THROW(attention(tape.constant(random_matrix(2, 4, rng)), tape.constant(random_matrix(3, 4, rng)),
                         tape.constant(random_matrix(2, 2, rng))),
               StructuralError);
}

class Mha : public ::testing::Test {
 protected:
  Mha() : store(14), mha(store, "mha", {8, 2, 3}) {}
  Matrix run(const Matrix& q, const Matrix& kv, const std::vector<int>& types) {
    Tape tape;
    return mha
        .forward(tape, store, tape.constant(q), tape.constant(kv), types, Segments::single(static_cast<int>(q.rows())),
                 Segments::single(static_cast<int>(kv.rows())))
        .value();
  }
  ParamStore store;
  MultiHeadAttention mha;
  std::mt19937_64 rng{15};
};

TEST_F(Mha, IdentityProjectionsReduceToAttention) {
  ParamStore s1(1);
  MultiHeadAttention one(s1, "a", {8, 1, 3});
  for (const char* n : {"a.q", "a.k", "a.v", "a.o"}) {
    s1.at(std::string(n) + ".w").value = Matrix::Identity(8, 8);
    s1.at(std::string(n) + ".b").value.setZero();
  }
  s1.at("a.type").value.setZero();
  const Matrix q = random_matrix(2, 8, rng), kv = random_matrix(5, 8, rng);
  const std::vector<int> types{0, 1, 1, 2, 2};
  Tape tape;
  const Matrix got = one.forward(tape, s1, tape.constant(q), tape.constant(kv), types, Segments::single(2),
                                 Segments::single(5))
                         .value();
  const Matrix want = attention(tape.constant(q), tape.constant(kv), tape.constant(kv)).value();
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(Mha, JointKeyValuePermutation) {
  const Matrix q = random_matrix(3, 8, rng), kv = random_matrix(6, 8, rng);
  const std::vector<int> types{0, 1, 1, 1, 2, 2};
  const Matrix base = run(q, kv, types);
  std::vector<int> order{0, 1, 2, 3, 4, 5};
  for (int t = 0; t < 20; ++t) {
    std::shuffle(order.begin(), order.end(), rng);
    Matrix pkv(6, 8);
    std::vector<int> pt(6);
    for (int r = 0; r < 6; ++r) {
      pkv.row(r) = kv.row(order[static_cast<std::size_t>(r)]);
      pt[static_cast<std::size_t>(r)] = types[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
    }
    EXPECT_LT((run(q, pkv, pt) - base).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST_F(Mha, TypeEmbeddingTouchesKeysOnly) {
  const Matrix q = random_matrix(1, 8, rng), kv = random_matrix(1, 8, rng);
  // A single key: output is o(v(kv)) whatever the key type.
  EXPECT_LT((run(q, kv, {0}) - run(q, kv, {2})).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix kv2 = random_matrix(3, 8, rng);
  EXPECT_GT((run(q, kv2, {0, 1, 2}) - run(q, kv2, {2, 2, 2})).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(Mha, ZeroOutputProjection) {
  store.at("mha.o.w").value.setZero();
  store.at("mha.o.b").value.setZero();
  EXPECT_TRUE(run(random_matrix(2, 8, rng), random_matrix(4, 8, rng), {0, 1, 2, 1}).isZero());
}

TEST(MhaConfig, HeadCountMustDivide) {
  ParamStore store(1);
  EXPECT_THROW(MultiHeadAttention(store, "x", {10, 3, 3}), StructuralError);
}

TEST(MhaConfig, KeyTypeCountChecked) {
  ParamStore store(1);
  MultiHeadAttention mha(store, "x", {4, 2, 3});
  Tape tape;
  const std::vector<int> types{0};
  EXPECT_THROW(mha.forward(tape, store, tape.constant(Matrix::Ones(1, 4)), tape.constant(Matrix::Ones(2, 4)), types,
                           Segments::single(1), Segments::single(2)),
               StructuralError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore store(16);
  store.create("w", 3, 3, 3);
  const Matrix before = store.at("w").value;
  Adam opt;
  store.zero_grad();
  for (int i = 0; i < 5; ++i) opt.update(store);
  EXPECT_EQ(store.at("w").value, before);
}

TEST(Adam, ConstantGradientDescends) {
  ParamStore store(17);
  store.create_zero("w", 1, 2);
  Adam opt({0.01});
  for (int i = 0; i < 100; ++i) {
    store.at("w").grad << 0.3, -2.0;
    opt.update(store);
  }
  EXPECT_LT(store.at("w").value(0, 0), 0.0);
  EXPECT_GT(store.at("w").value(0, 1), 0.0);
}

TEST(Adam, QuadraticStep) {
  ParamStore store(18);
  store.create_zero("w", 1, 1);
  store.at("w").value(0, 0) = 1.0;
  Adam opt({0.1});
  Tape tape;
  backward(tape, sum(square(tape.param(store.at("w")))), store);
  opt.update(store);
  // Bias-corrected first step moves by lr * g / (|g| + eps) = 0.1.
  EXPECT_NEAR(store.at("w").value(0, 0), 0.9, 1e-6);
  EXPECT_LT(std::abs(store.at("w").value(0, 0)), 1.0);
}

TEST(Adam, GradientClipLimitsNorm) {
  ParamStore a(19), b(19);
  a.create_zero("w", 1, 1);
  b.create_zero("w", 1, 1);
  a.at("w").grad(0, 0) = 100.0;
  b.at("w").grad(0, 0) = 1.0;
  Adam oa({0.1, 0.9, 0.999, 1e-8, 1.0}), ob({0.1, 0.9, 0.999, 1e-8, 1.0});
  oa.update(a);
  ob.update(b);
  EXPECT_NEAR(a.at("w").value(0, 0), b.at("w").value(0, 0), 1e-12);
}

TEST(ParamStoreTest, CheckpointRoundTrip) {
  ParamStore store(20);
  Mlp mlp(store, "m", {3, 4, 2});
  store.create("extra", 2, 5, 5);
  const auto bytes = store.serialize();
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(bytes.data()), 7), "SVOCKPT");
  EXPECT_EQ(bytes[8], 1);  // little-endian version
  EXPECT_EQ(bytes[9], 0);
  const auto back = ParamStore::deserialize(bytes);
  EXPECT_EQ(back.seed(), 20u);
  ASSERT_EQ(back.names(), store.names());
  for (const auto& n : store.names()) EXPECT_EQ(back.at(n).value, store.at(n).value);

  const auto path = std::filesystem::temp_directory_path() / "svodrive_ckpt_test.bin";
  store.save(path);
  ParamStore other(99);
  Mlp mlp2(other, "m", {3, 4, 2});
  other.create("extra", 2, 5, 5);
  other.load_values(ParamStore::load(path));
  for (const auto& n : store.names()) EXPECT_EQ(other.at(n).value, store.at(n).value);
  std::filesystem::remove(path);
}

TEST(ParamStoreTest, CorruptCheckpointRejected) {
  ParamStore store(21);
  store.create("w", 2, 2, 2);
  auto bytes = store.serialize();
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(ParamStore::deserialize(bad), FormatError);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(ParamStore::deserialize(bytes), FormatError);
}

TEST(ParamStoreTest, DuplicateNamesAndShapeMismatch) {
  ParamStore a(22);
  a.create("w", 2, 2, 2);
  EXPECT_THROW(a.create("w", 2, 2, 2), StructuralError);
  ParamStore b(22);
  b.create("w", 3, 2, 2);
  EXPECT_THROW(a.load_values(b), StructuralError);
}

TEST(ParamStoreTest, SeededInitialisationIsDeterministic) {
  ParamStore a(23), b(23), c(24);
  Mlp ma(a, "m", {4, 4}), mb(b, "m", {4, 4}), mc(c, "m", {4, 4});
  EXPECT_EQ(a.at("m.0.w").value, b.at("m.0.w").value);
  EXPECT_NE(a.at("m.0.w").value, c.at("m.0.w").value);
  EXPECT_LE(a.at("m.0.w").value.cwiseAbs().maxCoeff(), 0.5);
}

TEST(ParamStoreTest, SoftUpdate) {
  ParamStore a(25), b(26);
  a.create_zero("w", 1, 1);
  b.create_zero("w", 1, 1);
  b.at("w").value(0, 0) = 2.0;
  a.soft_update_from(b, 0.25);
  EXPECT_DOUBLE_EQ(a.at("w").value(0, 0), 0.5);
}

}  // namespace
