#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ecgbench/diffcore.hpp"
#include "support/primitive_cases.hpp"

namespace {

using namespace ecgbench::diff;
using ecgbench::testing::primitive_cases;
using ecgbench::testing::random_array;

Array<double> mat(std::size_t r, std::size_t c, std::vector<double> v) {
  return Array<double>(Shape{r, c}, std::move(v));
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape<double> t;
  auto m = mat(2, 3, {1, 2, 3, 4, 5, 6});
  auto y = matmul(t.constant(mat(2, 2, {1, 0, 0, 1})), t.constant(m));
  EXPECT_EQ(y.shape(), (Shape{2, 3}));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y.value()[i], m[i]);
}

TEST(Matmul, SmallProduct) {
  Tape<double> t;
  auto y = matmul(t.constant(mat(2, 2, {1, 2, 3, 4})), t.constant(mat(2, 1, {1, 1})));
  EXPECT_EQ(y.shape(), (Shape{2, 1}));
  EXPECT_EQ(y.value()[0], 3);
  EXPECT_EQ(y.value()[1], 7);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape<double> t;
  try {
    matmul(t.constant(Array<double>({2, 3})), t.constant(Array<double>({2, 3})));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("(2,3) and (2,3)"), std::string::npos) << e.what();
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  auto a = random_array(rng, {5, 4});
  auto b = random_array(rng, {4, 3});
  auto report = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& v) {
        return ecgbench::testing::weighted_sum(matmul(v[0], v[1]), 11);
      },
      {a, b}, GradCheckOptions{1e-5, 1e-4});
  EXPECT_TRUE(report.passed) << report.worst_rel_error;
}

TEST(Conv1d, SameLengthAndStridedLength) {
  EXPECT_EQ(conv_out_length(300, 7, 1, 3, 3), 300u);
  EXPECT_EQ(conv_out_length(300, 7, 2, 3, 3), 150u);
  Tape<double> t;
  auto x = t.constant(Array<double>({1, 2, 300}, 1.0));
  auto w = t.constant(Array<double>({4, 2, 7}, 0.5));
  EXPECT_EQ(conv1d(x, w, 1, 3).shape(), (Shape{1, 4, 300}));
  EXPECT_EQ(conv1d(x, w, 2, 3).shape(), (Shape{1, 4, 150}));
}

TEST(Conv1d, KernelLongerThanPaddedInputIsRejected) {
  Tape<double> t;
  auto x = t.constant(Array<double>({1, 1, 4}));
  auto w = t.constant(Array<double>({1, 1, 7}));
  EXPECT_THROW(conv1d(x, w, 1, 1), ShapeError);
  EXPECT_NO_THROW(conv1d(x, w, 1, 2));
}

TEST(Conv1d, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> d(1, 4);
    const std::size_t B = d(rng), cin = d(rng), cout = d(rng), K = d(rng) + 1, stride = d(rng);
    const std::size_t pad = d(rng) - 1, L = K + d(rng) * 3;
    auto xv = random_array(rng, {B, cin, L});
    auto wv = random_array(rng, {cout, cin, K});
    Tape<double> t;
    auto y = conv1d(t.constant(xv), t.constant(wv), stride, pad).value();
    const std::size_t Lo = (L + 2 * pad - K) / stride + 1;
    ASSERT_EQ(y.shape(), (Shape{B, cout, Lo}));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t l = 0; l < Lo; ++l) {
          double s = 0;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t k = 0; k < K; ++k) {
              const long src = static_cast<long>(l * stride + k) - static_cast<long>(pad);
              if (src >= 0 && src < static_cast<long>(L)) s += wv[(co * cin + ci) * K + k] * xv[(b * cin + ci) * L + src];
            }
          EXPECT_NEAR(y[(b * cout + co) * Lo + l], s, 1e-12);
        }
  }
}

TEST(Conv1d, LengthFormulaSweep) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> len(1, 40), ker(1, 9), st(1, 4), pad(0, 4);
  int checked = 0;
  while (checked < 1000) {
    const std::size_t L = len(rng), K = ker(rng), S = st(rng), P = pad(rng);
    if (K > L + 2 * P) continue;
    // count windows by enumeration of start positions in the padded input
    std::size_t windows = 0;
    for (std::size_t start = 0; start + K <= L + 2 * P; start += S) ++windows;
    Tape<double> t;
    auto y = conv1d(t.constant(Array<double>({1, 1, L}, 1.0)), t.constant(Array<double>({1, 1, K}, 1.0)), S, P);
    ASSERT_EQ(y.dim(2), windows) << L << ' ' << K << ' ' << S << ' ' << P;
    ++checked;
  }
}

TEST(Elementwise, Log1pExpAndSigmoidValues) {
  Tape<double> t;
  auto x = t.constant(Array<double>({3}, std::vector<double>{0.0, 1000.0, -1000.0}));
  auto y = log1p_exp(x).value();
  EXPECT_NEAR(y[0], std::log(2.0), 1e-15);
  EXPECT_EQ(y[1], 1000.0);
  EXPECT_GE(y[2], 0.0);
  EXPECT_LT(y[2], 1e-300);
  EXPECT_EQ(sigmoid(t.constant(Array<double>::scalar(0.0))).value().item(), 0.5);
}

TEST(Elementwise, Log1pExpIsFiniteInFloat) {
  Tape<float> t;
  auto y = log1p_exp(t.constant(Array<float>({2}, std::vector<float>{1000.f, -1000.f}))).value();
  EXPECT_EQ(y[0], 1000.f);
  EXPECT_TRUE(y.all_finite());
}

TEST(Elementwise, ShapeMismatchIsRejected) {
  Tape<double> t;
  EXPECT_THROW(add(t.constant(Array<double>({2, 3})), t.constant(Array<double>({3, 2}))), ShapeError);
  EXPECT_THROW(mul(t.constant(Array<double>({2, 3})), t.constant(Array<double>({2}))), ShapeError);
}

TEST(Reduce, MeanSumAndPooling) {
  Tape<double> t;
  auto x = t.leaf(Array<double>({3}, std::vector<double>{1, 2, 3}));
  EXPECT_EQ(mean(x, 0).value().item(), 2.0);
  auto s = sum(x, 0);
  t.backward(s);
  const auto gx = t.grad(x);
  for (double g : gx.values()) EXPECT_EQ(g, 1.0);
  auto pooled = mean(t.constant(Array<double>({2, 512, 9}, 1.0)), 2);
  EXPECT_EQ(pooled.shape(), (Shape{2, 512}));
  EXPECT_THROW(mean(x, 1), ShapeError);
}

TEST(Backward, IdentityAndAccumulation) {
  Tape<double> t;
  auto x = t.leaf(Array<double>::scalar(3.0));
  t.backward(x);
  EXPECT_EQ(t.grad(x).item(), 1.0);
  auto y = add(x, x);
  t.backward(y);
  EXPECT_EQ(t.grad(x).item(), 2.0);
}

TEST(Backward, NonScalarRootIsRejected) {
  Tape<double> t;
  auto x = t.leaf(Array<double>({2}, 1.0));
  EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Backward, EntriesAreTopologicallyOrdered) {
  Tape<double> t;
  auto x = t.leaf(Array<double>({4}, 0.5));
  auto y = sum_all(mul(sigmoid(x), tanh(x)));
  for (int id = 0; id <= y.id; ++id) {
    for (int in : t.inputs(Var<double>{&t, id})) EXPECT_LT(in, id);
  }
}

TEST(Backward, IsLinearInTheRoot) {
  std::mt19937_64 rng(9);
  auto xv = random_array(rng, {5});
  auto f = [](Var<double> x) { return sum_all(mul(x, tanh(x))); };
  auto g = [](Var<double> x) { return sum_all(exp(x)); };
  Tape<double> t;
  auto x = t.leaf(xv);
  t.backward(add(f(x), g(x)));
  auto both = t.grad(x);
  t.backward(f(x));
  auto gf = t.grad(x);
  t.backward(g(x));
  auto gg = t.grad(x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(both[i], gf[i] + gg[i], 1e-14);
}

TEST(GradCheck, SumOfSquares) {
  auto report = grad_check([](Tape<double>&, Var<double> x) { return sum_all(mul(x, x)); },
                           Array<double>({2}, std::vector<double>{1, 2}), 1e-5, 1e-6);
  EXPECT_TRUE(report.passed);
  Tape<double> t;
  auto x = t.leaf(Array<double>({2}, std::vector<double>{1, 2}));
  t.backward(sum_all(mul(x, x)));
  EXPECT_EQ(t.grad(x)[0], 2.0);
  EXPECT_EQ(t.grad(x)[1], 4.0);
}

TEST(GradCheck, CorruptedBackwardRuleFails) {
  // doubling with a backward rule that forgets the factor of two
  auto bad_double = [](Var<double> a) {
    Array<double> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.mutable_data()[i] = 2 * a.value()[i];
    const int ia = a.id;
    return a.tape->record(
        std::move(out), {ia}, [ia](Tape<double>& t, std::span<const double> g) { t.accumulate(ia, g); },
        "bad_double");
  };
  auto report = grad_check([&](Tape<double>&, Var<double> x) { return sum_all(bad_double(x)); },
                           Array<double>({3}, 1.0), 1e-5, 1e-4);
  EXPECT_FALSE(report.passed);
  EXPECT_NEAR(report.worst_rel_error, 0.5, 1e-6);
}

TEST(GradCheck, KinkWithinStepIsClassifiedOnlyWhenRequested) {
  ScalarFn f = [](Tape<double>&, const std::vector<Var<double>>& v) { return sum_all(relu(v[0])); };
  const std::vector<Array<double>> x{Array<double>({2}, std::vector<double>{3e-6, 0.7})};
  auto plain = grad_check(f, x, GradCheckOptions{1e-5, 1e-3});
  EXPECT_FALSE(plain.passed);
  auto tolerant = grad_check(f, x, GradCheckOptions{1e-5, 1e-3, 0, 0, true});
  EXPECT_TRUE(tolerant.passed);
  EXPECT_EQ(tolerant.kinks, 1u);
  EXPECT_EQ(tolerant.checked, 1u);
}

TEST(GradCheck, KinkSkippingDoesNotHideWrongGradients) {
  auto halved = [](Var<double> a) {
    Array<double> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.mutable_data()[i] = 2 * a.value()[i];
    const int ia = a.id;
    return a.tape->record(
        std::move(out), {ia}, [ia](Tape<double>& t, std::span<const double> g) { t.accumulate(ia, g); }, "halved");
  };
  ScalarFn f = [&](Tape<double>&, const std::vector<Var<double>>& v) { return sum_all(halved(v[0])); };
  auto report = grad_check(f, {Array<double>({3}, 1.0)}, GradCheckOptions{1e-5, 1e-3, 0, 0, true});
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.kinks, 0u);
}

TEST(GradCheck, EveryPrimitiveAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (const auto& c : primitive_cases(seed)) {
      auto report = grad_check(c.fn, c.inputs, GradCheckOptions{1e-5, 1e-4});
      ASSERT_TRUE(report.passed) << c.name << " seed " << seed << " rel " << report.worst_rel_error
                                 << " analytic " << report.worst_analytic << " numeric "
                                 << report.worst_numeric;
    }
  }
}

TEST(Properties, ForwardOutputsFiniteForFiniteInputs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& c : primitive_cases(seed)) {
      Tape<double> t;
      std::vector<Var<double>> vars;
      for (const auto& x : c.inputs) vars.push_back(t.leaf(x));
      auto y = c.fn(t, vars);
      for (std::size_t id = 0; id < t.size(); ++id) {
        ASSERT_TRUE(t.value(Var<double>{&t, static_cast<int>(id)}).all_finite()) << c.name;
      }
      ASSERT_TRUE(y.value().all_finite());
    }
  }
}

TEST(ShapeOps, PermuteMatchesIndexArithmetic) {
  std::mt19937_64 rng(1);
  auto xv = random_array(rng, {2, 3, 4});
  Tape<double> t;
  auto y = permute(t.constant(xv), {2, 0, 1}).value();
  ASSERT_EQ(y.shape(), (Shape{4, 2, 3}));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y[(c * 2 + a) * 3 + b], xv[(a * 3 + b) * 4 + c]);
}

TEST(Norm, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(2);
  Tape<double> t;
  auto y = softmax(t.constant(random_array(rng, {4, 7}, -30, 30))).value();
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t i = 0; i < 7; ++i) s += y[r * 7 + i];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

}  // namespace
