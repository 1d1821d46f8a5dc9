#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcs2s/grad_check.hpp"
#include "lcs2s/tensor.hpp"

using namespace lcs2s;

namespace {

using Mat = Matrix<double>;

Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Parameter<double> random_param(const std::string& name, Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Parameter<double> p(name, rows, cols);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  return p;
}

}  // namespace

TEST(Matmul, IdentityAndAnnihilator) {
  Tape<double> tape;
  const auto a = tape.constant(mat({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(a, tape.constant(Mat::Identity(2, 2))).value(), mat({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(a, tape.constant(Mat::Zero(2, 2))).value(), Mat::Zero(2, 2));
}

TEST(Matmul, HandProduct) {
  Tape<double> tape;
  const auto c = matmul(tape.constant(mat({{1, 2}})), tape.constant(mat({{3}, {4}})));
  EXPECT_EQ(c.value(), mat({{11}}));
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  Tape<double> tape;
  try {
    matmul(tape.constant(Mat::Zero(2, 3)), tape.constant(Mat::Zero(2, 3)));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
  }
}

TEST(Pointwise, Values) {
  Tape<double> tape;
  EXPECT_EQ(tanh(tape.constant(mat({{0}}))).value()(0, 0), 0.0);
  EXPECT_EQ(sigmoid(tape.constant(mat({{0}}))).value()(0, 0), 0.5);
  const auto joined = concat({tape.constant(mat({{1, 2}})), tape.constant(mat({{3}}))});
  EXPECT_EQ(joined.value(), mat({{1, 2, 3}}));
  const auto stacked = concat({tape.constant(mat({{1, 2}})), tape.constant(mat({{3, 4}}))}, 0);
  EXPECT_EQ(stacked.value(), mat({{1, 2}, {3, 4}}));
}

TEST(Pointwise, ShapeMismatch) {
  Tape<double> tape;
  const auto a = tape.constant(Mat::Zero(1, 2));
  const auto b = tape.constant(Mat::Zero(1, 3));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(a * b, ShapeError);
  EXPECT_THROW(concat({a, b}, 0), ShapeError);
  EXPECT_THROW(add_bias(a, b), ShapeError);
  EXPECT_THROW(add_bias(tape.constant(Mat::Zero(2, 2)), tape.constant(Mat::Zero(2, 2))), ShapeError);
}

TEST(Softmax, Fixtures) {
  Tape<double> tape;
  const Mat half = softmax(tape.constant(mat({{0, 0}}))).value();
  EXPECT_NEAR(half(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(half(0, 1), 0.5, 1e-12);

  for (double c : {-700.0, 0.0, 3.5, 1e6}) {
    const Mat third = softmax(tape.constant(Mat::Constant(1, 3, c))).value();
    for (Index j = 0; j < 3; ++j) EXPECT_NEAR(third(0, j), 1.0 / 3.0, 1e-12) << c;
  }

  const Mat p = softmax(tape.constant(mat({{std::log(1.0), std::log(2.0), std::log(3.0)}}))).value();
  EXPECT_NEAR(p(0, 0), 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(p(0, 1), 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(p(0, 2), 3.0 / 6.0, 1e-12);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-20.0, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    Mat logits(3, 7);
    for (Index i = 0; i < logits.size(); ++i) logits.data()[i] = dist(rng);
    Tape<double> tape;
    const Mat p = softmax(tape.constant(logits)).value();
    const Mat q = softmax(tape.constant((logits.array() + 123.25).matrix())).value();
    for (Index r = 0; r < 3; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(Softmax, RejectsNonFinite) {
  Tape<double> tape;
  EXPECT_THROW(softmax(tape.constant(mat({{1, NAN}}))), NumericError);
  EXPECT_THROW(log_softmax(tape.constant(mat({{INFINITY, 0}}))), NumericError);
}

TEST(Softmax, MaskedRowsIgnorePadding) {
  Tape<double> tape;
  const std::vector<int> lengths{1, 3};
  const Mat p = softmax(tape.constant(mat({{5, 9, 9}, {0, 0, 0}})), lengths).value();
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_EQ(p(0, 2), 0.0);
  EXPECT_NEAR(p(1, 2), 1.0 / 3.0, 1e-12);
}

TEST(Backward, SquareGradient) {
  Parameter<double> x("x", 1, 1);
  x.value(0, 0) = 3.0;
  Tape<double> tape;
  const auto v = tape.param(x);
  tape.backward(sum(v * v));
  EXPECT_EQ(x.grad(0, 0), 6.0);
}

TEST(Backward, LinearMap) {
  Parameter<double> a("a", 1, 2);
  a.value = mat({{1, 2}});
  Tape<double> tape;
  tape.backward(sum(matmul(tape.param(a), tape.constant(mat({{1}, {1}})))));
  EXPECT_EQ(a.grad, mat({{1, 1}}));
}

TEST(Backward, ReusedNodeAccumulates) {
  Parameter<double> x("x", 1, 1);
  x.value(0, 0) = 0.7;
  Tape<double> tape;
  const auto v = tape.param(x);
  tape.backward(sum(v + v));
  EXPECT_EQ(x.grad(0, 0), 2.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape<double> tape;
  EXPECT_THROW(tape.backward(tape.variable(Mat::Zero(1, 2))), ContractError);
  Tape<double> eval_only(false);
  EXPECT_THROW(eval_only.backward(eval_only.variable(Mat::Zero(1, 1))), ContractError);
}

TEST(Backward, ParameterOffPathGetsZero) {
  Parameter<double> used("used", 1, 2);
  Parameter<double> unused("unused", 2, 2);
  used.value = mat({{0.5, -1}});
  unused.value = mat({{1, 2}, {3, 4}});
  Tape<double> tape;
  tape.param(unused);
  tape.backward(sum(tanh(tape.param(used))));
  EXPECT_EQ(unused.grad, Mat::Zero(2, 2));
}

TEST(Backward, ClearKeepsParameterValues) {
  Parameter<double> w("w", 2, 2);
  w.value = mat({{1, 2}, {3, 4}});
  Tape<double> tape;
  tape.backward(sum(tanh(tape.param(w))));
  tape.clear();
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_EQ(w.value, mat({{1, 2}, {3, 4}}));
}

TEST(Backward, DeterministicReplay) {
  std::mt19937_64 rng(9);
  Parameter<double> w = random_param("w", 4, 4, rng);
  Parameter<double> x = random_param("x", 3, 4, rng);
  auto run = [&]() {
    w.zero_grad();
    x.zero_grad();
    Tape<double> tape;
    const auto h = tanh(matmul(tape.param(x), tape.param(w)));
    tape.backward(sum(log_softmax(matmul(h, tape.param(w)))));
    return std::make_pair(Mat(w.grad), Mat(x.grad));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first.first, second.first);
  EXPECT_EQ(first.second, second.second);
}

TEST(Gather, OutOfRangeIsVocabError) {
  Parameter<double> table("table", 3, 2);
  Tape<double> tape;
  const std::vector<int> bad{0, 3};
  EXPECT_THROW(tape.gather(table, bad), VocabError);
}

// ---- finite-difference checks ---------------------------------------------

class PrimitiveGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{11};
};

TEST_F(PrimitiveGradients, EveryOpMatchesCentralDifferences) {
  Parameter<double> a = random_param("a", 3, 4, rng);
  Parameter<double> b = random_param("b", 3, 4, rng);
  Parameter<double> w = random_param("w", 4, 5, rng);
  Parameter<double> bias = random_param("bias", 1, 5, rng);
  Parameter<double> table = random_param("table", 6, 4, rng);
  Parameter<double> query = random_param("query", 2, 3, rng);
  Parameter<double> memory = random_param("memory", 2, 12, rng);
  Parameter<double> probe = random_param("probe", 3, 5, rng);

  const std::vector<int> ids{4, 0, 4};
  const std::vector<int> picks{2, 0, 4};
  const std::vector<int> rows{2, 2, 0, 1};
  const std::vector<int> lengths{4, 2};
  const Mat mask = mat({{1}, {0}, {1}});
  const Mat probe_weights = probe.value;

  const std::function<Var<double>(Tape<double>&)> loss = [&](Tape<double>& tape) {
    const auto av = tape.param(a);
    const auto bv = tape.param(b);
    const auto mixed = tape.blend(mask, av * bv, tanh(av + tape.gather(table, ids)));
    const auto hidden = sigmoid(add_bias(matmul(mixed, tape.param(w)), tape.param(bias)));
    const auto scaled = hidden * 1.5;
    const auto sliced = tape.slice_cols(scaled, 1, 3);
    const auto stacked = concat({sliced, tape.select_rows(sliced, rows)}, 0);
    const auto lp = tape.pick(log_softmax(scaled), picks);

    const auto scores = tape.memory_scores(tape.param(query), tape.param(memory));
    const auto weights = softmax(scores, std::span<const int>(lengths));
    const auto ctx = tape.memory_mix(weights, tape.param(memory));
    const auto tiled = tape.repeat_rows(tape.slice_cols(tape.select_rows(ctx, std::vector<int>{1}), 0, 3), 7);

    return sum(lp) + sum(tanh(stacked) * tanh(tiled)) + tape.weighted_sum(softmax(scaled), probe_weights);
  };
  const GradCheckReport report =
      grad_check<double>({&a, &b, &w, &bias, &table, &query, &memory}, loss, 1e-5);
  EXPECT_TRUE(report.passed(1e-4)) << report.max_relative_error << " at " << report.worst_location;
}

TEST_F(PrimitiveGradients, ThreeLayerComposite) {
  Parameter<double> x = random_param("x", 2, 5, rng);
  Parameter<double> w1 = random_param("w1", 5, 6, rng);
  Parameter<double> w2 = random_param("w2", 6, 6, rng);
  Parameter<double> w3 = random_param("w3", 6, 3, rng);
  const std::function<Var<double>(Tape<double>&)> loss = [&](Tape<double>& tape) {
    const auto h1 = tanh(matmul(tape.param(x), tape.param(w1)));
    const auto h2 = sigmoid(matmul(h1, tape.param(w2)));
    return sum(log_softmax(matmul(h2, tape.param(w3))) * log_softmax(matmul(h2, tape.param(w3))));
  };
  const GradCheckReport report = grad_check<double>({&x, &w1, &w2, &w3}, loss, 1e-4);
  EXPECT_TRUE(report.passed(1e-4)) << report.max_relative_error << " at " << report.worst_location;
}

TEST(GradCheck, IdentityIsExact) {
  Parameter<double> p("p", 1, 1);
  p.value(0, 0) = 0.3;
  const std::function<Var<double>(Tape<double>&)> loss = [&](Tape<double>& tape) { return sum(tape.param(p)); };
  EXPECT_LT(grad_check<double>({&p}, loss, 1e-5).max_relative_error, 1e-10);
}

TEST(GradCheck, DeadParameterHasZeroError) {
  Parameter<double> live("live", 1, 2);
  Parameter<double> dead("dead", 2, 2);
  live.value = mat({{0.1, -0.4}});
  const std::function<Var<double>(Tape<double>&)> loss = [&](Tape<double>& tape) {
    return sum(tanh(tape.param(live)));
  };
  const GradCheckReport report = grad_check<double>({&live, &dead}, loss, 1e-5);
  EXPECT_EQ(dead.grad, Mat::Zero(2, 2));
  EXPECT_LT(report.max_relative_error, 1e-8);
}

TEST(GradCheck, ReportsNanLocation) {
  Parameter<double> p("p", 1, 2);
  p.value = mat({{NAN, 1.0}});
  const std::function<Var<double>(Tape<double>&)> loss = [&](Tape<double>& tape) {
    return sum(tape.param(p) * tape.param(p));
  };
  const GradCheckReport report = grad_check<double>({&p}, loss, 1e-5);
  EXPECT_TRUE(report.found_nan);
  EXPECT_EQ(report.nan_location, "p[0,0]");
  EXPECT_FALSE(report.passed(1.0));
}

TEST(Precision, SinglePrecisionTapeRuns) {
  Parameter<float> w("w", 2, 2);
  w.value << 0.5f, -0.5f, 0.25f, 1.0f;
  Tape<float> tape;
  tape.backward(sum(tanh(tape.param(w))));
  EXPECT_NEAR(w.grad(0, 0), 1.0f - std::tanh(0.5f) * std::tanh(0.5f), 1e-6f);
}
