#include <doctest.h>

#include <cmath>
#include <vector>

#include "fav/autodiff.hpp"
#include "fav/error.hpp"
#include "fav/nn.hpp"
#include "fav/text.hpp"
#include "support.hpp"

using namespace fav;
using fav::testing::naive_matmul;
using fav::testing::random_tensor;

TEST_CASE("matmul agrees with the triple loop") {
  const Tensor a = random_tensor({5, 7}, 1), b = random_tensor({7, 3}, 2);
  CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("softmax rows are stochastic and shift invariant") {
  Tensor x = random_tensor({4, 6}, 3, -5, 5);
  const Tensor p = softmax_rows(x);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (auto& v : x.data()) v += 100.0;
  CHECK(max_abs_diff(softmax_rows(x), p) < 1e-12);
}

TEST_CASE("layer norm output has zero mean and unit variance") {
  const Tensor x = random_tensor({3, 8}, 4, -2, 3);
  const Tensor y = layer_norm(x, Tensor({8}, 1.0), Tensor({8}, 0.0), 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0.0, v = 0.0;
    for (double e : y.row(r)) m += e;
    m /= 8;
    for (double e : y.row(r)) v += (e - m) * (e - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 8 == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("cross entropy of uniform logits is ln C") {
  Tape tape;
  const std::vector<int> labels{0, 3, 9};
  Var loss = cross_entropy(tape.constant(Tensor({3, 10})), labels);
  CHECK(loss.value()[0] == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("backward of a composed expression matches hand derivatives") {
  // f(W) = sum(x W), so df/dW[i][j] = sum over rows of x[r][i].
  ParameterStore store;
  Parameter& w = store.add("w", random_tensor({3, 2}, 5));
  const Tensor x = random_tensor({4, 3}, 6);
  Tape tape;
  tape.backward(sum(matmul(tape.constant(x), tape.param(w))));
  for (std::size_t i = 0; i < 3; ++i) {
    double col = 0.0;
    for (std::size_t r = 0; r < 4; ++r) col += x(r, i);
    CHECK(w.grad()(i, 0) == doctest::Approx(col).epsilon(1e-12));
    CHECK(w.grad()(i, 1) == doctest::Approx(col).epsilon(1e-12));
  }
}

TEST_CASE("backward visits nodes in exact reverse order") {
  ParameterStore store;
  Parameter& w = store.add("w", random_tensor({2, 2}, 7));
  Tape tape;
  Var a = tape.param(w);
  Var b = activate(a, Activation::tanh);
  Var c = scale(b, 2.0);
  Var d = sum(c);
  std::vector<std::size_t> seen;
  tape.set_backward_observer([&](std::size_t id, std::string_view) { seen.push_back(id); });
  tape.backward(d);
  CHECK(seen == std::vector<std::size_t>{d.id(), c.id(), b.id(), a.id()});
}

TEST_CASE("gradient check passes on every differentiable op") {
  ParameterStore store;
  Initializer init(11);
  Parameter& a = store.add("a", init.uniform({3, 4}, -1, 1));
  Parameter& b = store.add("b", init.uniform({4, 4}, -1, 1));
  Parameter& g = store.add("g", init.uniform({4}, 0.5, 1.5));
  Parameter& bias = store.add("bias", init.uniform({4}, -0.5, 0.5));
  std::vector<Parameter*> ps{&a, &b, &g, &bias};
  const std::vector<int> labels{1, 0, 3};
  auto loss = [&](Tape& t) {
    Var x = matmul(t.param(a), t.param(b));
    x = layer_norm(x, t.param(g), t.param(bias), 1e-5);
    x = activate(x, Activation::gelu);
    Var s = softmax_rows(scaled_scores(x, x, 0.5));
    Var y = add_bias(matmul(s, x), t.param(bias));
    const std::array<Var, 2> halves{slice_cols(y, 0, 2), slice_cols(y, 2, 4)};
    Var cat = concat_cols(halves);
    const std::array<Var, 2> rows{slice_rows(cat, 0, 1), row_normalize(activate(slice_rows(cat, 1, 3), Activation::identity))};
    Var z = concat_rows(rows);
    return add(cross_entropy(z, labels), sum(scale(mean_rows(activate(z, Activation::tanh)), 0.1)));
  };
  const GradCheckResult r = gradient_check(loss, ps);
  CHECK(r.coordinates > 0);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("non-finite values raise a numeric error naming the stage") {
  Tape tape;
  Tensor t({2}, 1.0);
  t[1] = std::nan("");
  CHECK_THROWS_AS(check_finite(t, "probe"), NumericError);
  try {
    check_finite(t, "probe");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("probe") != std::string::npos);
  }
}

TEST_CASE("float rounding is idempotent") {
  Tensor t = random_tensor({10}, 8);
  round_to_float(t);
  Tensor u = t;
  round_to_float(u);
  CHECK(t == u);
  for (double v : t.data()) CHECK(double(float(v)) == v);
}

TEST_CASE("memory tracker sees tensor storage") {
  const std::size_t before = MemoryTracker::live_bytes();
  {
    Tensor t({1000});
    CHECK(MemoryTracker::live_bytes() == before + 8000);
  }
  CHECK(MemoryTracker::live_bytes() == before);
}

TEST_CASE("strict text parsing") {
  CHECK(parse_double("0.25", "x") == 0.25);
  CHECK(parse_u64("42", "n") == 42);
  CHECK(parse_bool("true", "b"));
  CHECK_FALSE(parse_bool("0", "b"));
  CHECK_THROWS_AS(parse_double("0.25x", "x"), ConfigError);
  CHECK_THROWS_AS(parse_u64("-1", "n"), ConfigError);
  CHECK_THROWS_AS(parse_bool("maybe", "b"), ConfigError);
  for (double v : {0.1, 1e-4, 3.0, -2.5e300}) CHECK(parse_double(format_double(v), "v") == v);
  CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(trim("  x y \t") == "x y");
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
