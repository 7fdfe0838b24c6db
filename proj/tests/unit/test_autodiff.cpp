#include <cmath>
#include <numbers>
#include <random>

#include "apnet2/ad/grad_check.hpp"
#include "apnet2/ad/ops.hpp"
#include "doctest.h"

using namespace apnet2;
using namespace apnet2::ad;
using Td = Tensor<double>;

namespace {

Td rand_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = u(rng);
  return Td(std::move(shape), std::move(v), grad);
}

// Weighted sum so every output element carries a distinct upstream gradient.
Td probe(const Td& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  Td w = rand_tensor(y.shape(), rng, -1.0, 1.0, false);
  return sum(mul(y, w));
}

double check(const std::function<Td()>& f, const std::vector<Td>& in) {
  return grad_check(f, in).max_rel_error;
}

}  // namespace

TEST_CASE("conv1d output length arithmetic") {
  Td x = Td::zeros({1, 1, 16});
  Conv1dOptions same{.stride = 1, .padding = 3};
  CHECK(conv1d(x, Td::zeros({1, 1, 7}), Td(), same).dim(2) == 16);
  Conv1dOptions dil{.stride = 1, .padding = 2, .dilation = 2};
  CHECK(conv1d(x, Td::zeros({1, 1, 3}), Td(), dil).dim(2) == 16);

  // receptive field of a dilated kernel: an impulse spreads over 5 samples
  std::vector<double> impulse(16, 0.0);
  impulse[8] = 1.0;
  Td y = conv1d(Td({1, 1, 16}, impulse), Td::full({1, 1, 3}, 1.0), Td(), dil);
  int nonzero = 0;
  for (double v : y.values()) nonzero += v != 0.0;
  CHECK(nonzero == 3);
  CHECK(y.values()[6] == 1.0);
  CHECK(y.values()[10] == 1.0);
}

TEST_CASE("activation values") {
  CHECK(gelu(Td::scalar(0.0)).item() == 0.0);
  CHECK(leaky_relu(Td::scalar(-1.0), 0.1).item() == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(gelu(Td::scalar(1.0)).item() == doctest::Approx(0.8411919906082768).epsilon(1e-12));
}

TEST_CASE("backward: linear map and quadratic") {
  std::mt19937_64 rng(1);
  Td x = rand_tensor({5}, rng, -1, 1, false);
  Td w = rand_tensor({5}, rng);
  Tape<double> tape;
  {
    TapeScope<double> s(tape);
    backward(tape, sum(mul(w, x)));
  }
  for (std::size_t i = 0; i < 5; ++i) CHECK(w.grad()[i] == x.values()[i]);

  Td v({1}, {1.0}, true);
  Tape<double> t2;
  Td loss;
  {
    TapeScope<double> s(t2);
    loss = mean(square(add_scalar(v, -3.0)));
  }
  backward(t2, loss);
  CHECK(v.grad()[0] == -4.0);
  backward(t2, loss);
  CHECK(v.grad()[0] == -8.0);
}

TEST_CASE("backward contract errors and reachability") {
  Td a({2}, {1.0, 2.0}, true);
  Td unused({1}, {5.0}, true);
  Tape<double> tape;
  Td y;
  {
    TapeScope<double> s(tape);
    y = mul_scalar(a, 2.0);
  }
  CHECK_THROWS_AS(backward(tape, y), std::invalid_argument);
  Td loss;
  {
    TapeScope<double> s(tape);
    loss = sum(y);
  }
  backward(tape, loss);
  CHECK(unused.grad().empty());
  CHECK(a.grad()[0] == 2.0);

  // nothing recorded without an active tape
  Td z = mul_scalar(a, 3.0);
  CHECK(z.node()->backward_fn == nullptr);
}

TEST_CASE("shape errors name the primitive") {
  Td a = Td::zeros({2, 3});
  Td b = Td::zeros({4, 3});
  try {
    add(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("add") == 0);
    CHECK(std::string(e.what()).find("[2, 3]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, Td::zeros({2, 2})), std::invalid_argument);
  CHECK_THROWS_AS(conv1d(Td::zeros({1, 3, 8}), Td::zeros({4, 2, 3}), Td()), std::invalid_argument);
  CHECK_THROWS_AS(slice(a, 1, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(reshape(a, {5}), std::invalid_argument);
}

TEST_CASE("structural ops forward values") {
  Td a({2, 3}, {1, 2, 3, 4, 5, 6});
  Td t = transpose(a, 0, 1);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(std::vector<double>(t.values().begin(), t.values().end()) == std::vector<double>{1, 4, 2, 5, 3, 6});
  Td p = pad(a, 1, 1, 2);
  CHECK(p.shape() == Shape{2, 6});
  CHECK(p.values()[1] == 1.0);
  CHECK(p.values()[0] == 0.0);
  Td s = slice(a, 1, 1, 3);
  CHECK(std::vector<double>(s.values().begin(), s.values().end()) == std::vector<double>{2, 3, 5, 6});
  Td c = concat<double>({a, s}, 1);
  CHECK(c.shape() == Shape{2, 5});
  CHECK(c.values()[3] == 2.0);
  Td m = mean(a, 1);
  CHECK(m.shape() == Shape{2, 1});
  CHECK(m.values()[1] == 5.0);
  Td b = add(a, Td({3}, {10, 20, 30}));
  CHECK(b.values()[5] == 36.0);
}

TEST_CASE("grad check: element-wise primitives") {
  std::mt19937_64 rng(7);
  Td a = rand_tensor({3, 4}, rng);
  Td b = rand_tensor({3, 4}, rng);
  Td pos = rand_tensor({3, 4}, rng, 0.5, 2.0);
  Td row = rand_tensor({4}, rng, 0.5, 2.0);
  const double tol = 1e-4;
  CHECK(check([&] { return probe(add(a, b)); }, {a, b}) < tol);
  CHECK(check([&] { return probe(sub(a, b)); }, {a, b}) < tol);
  CHECK(check([&] { return probe(mul(a, b)); }, {a, b}) < tol);
  CHECK(check([&] { return probe(div(a, pos)); }, {a, pos}) < tol);
  CHECK(check([&] { return probe(add(a, row)); }, {a, row}) < tol);
  CHECK(check([&] { return probe(mul(a, row)); }, {a, row}) < tol);
  CHECK(check([&] { return probe(div(a, row)); }, {a, row}) < tol);
  CHECK(check([&] { return probe(add_scalar(a, 0.3)); }, {a}) < tol);
  CHECK(check([&] { return probe(mul_scalar(a, -1.7)); }, {a}) < tol);
  CHECK(check([&] { return probe(neg(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(exp(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(log(pos)); }, {pos}) < tol);
  CHECK(check([&] { return probe(abs(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(cos(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(sin(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(sqrt(pos)); }, {pos}) < tol);
  CHECK(check([&] { return probe(square(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(pow(pos, 1.7)); }, {pos}) < tol);
  CHECK(check([&] { return probe(relu(a)); }, {a}) < tol);
  CHECK(check([&] { return probe(leaky_relu(a, 0.1)); }, {a}) < tol);
  CHECK(check([&] { return probe(gelu(mul_scalar(a, 3.0))); }, {a}) < tol);
  CHECK(check([&] { return probe(clamp_min(a, 0.1)); }, {a}) < tol);
}

TEST_CASE("grad check: phase and anti-wrap") {
  std::mt19937_64 rng(8);
  // keep away from the origin and from the branch cut on the negative real axis
  Td re = rand_tensor({20}, rng, -1.5, 1.5);
  Td im = rand_tensor({20}, rng, 0.3, 1.5);
  std::uniform_int_distribution<int> coin(0, 1);
  for (auto& v : im.mutable_values())
    if (coin(rng)) v = -v;
  CHECK(check([&] { return probe(phase(re, im)); }, {re, im}) < 1e-4);

  Td x = rand_tensor({20}, rng, -2.5, 2.5);
  for (auto& v : x.mutable_values())
    if (std::abs(v) < 0.05) v += 0.2;
  Td shift = rand_tensor({20}, rng, 0, 0, false);
  std::uniform_int_distribution<int> k(-3, 3);
  for (auto& v : shift.mutable_values()) v = 2 * std::numbers::pi * k(rng);
  CHECK(check([&] { return probe(anti_wrap(add(x, shift))); }, {x}) < 1e-4);
}

TEST_CASE("grad check: reductions and matmul") {
  std::mt19937_64 rng(9);
  Td a = rand_tensor({2, 3, 4}, rng);
  Td m = rand_tensor({4, 5}, rng);
  CHECK(check([&] { return mul_scalar(sum(a), 0.7); }, {a}) < 1e-4);
  CHECK(check([&] { return mean(square(a)); }, {a}) < 1e-4);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    CHECK(check([&] { return probe(sum(a, axis)); }, {a}) < 1e-4);
    CHECK(check([&] { return probe(mean(a, axis)); }, {a}) < 1e-4);
  }
  CHECK(check([&] { return probe(matmul(a, m)); }, {a, m}) < 1e-4);
}

TEST_CASE("grad check: structural primitives") {
  std::mt19937_64 rng(10);
  Td a = rand_tensor({2, 3, 4}, rng);
  Td b = rand_tensor({2, 2, 4}, rng);
  CHECK(check([&] { return probe(pad(a, 2, 2, 1)); }, {a}) < 1e-4);
  CHECK(check([&] { return probe(slice(a, 1, 1, 3)); }, {a}) < 1e-4);
  CHECK(check([&] { return probe(concat<double>({a, b}, 1)); }, {a, b}) < 1e-4);
  CHECK(check([&] { return probe(reshape(a, {4, 6})); }, {a}) < 1e-4);
  CHECK(check([&] { return probe(transpose(a, 0, 2)); }, {a}) < 1e-4);
  CHECK(check([&] { return probe(transpose(a, 1, 2)); }, {a}) < 1e-4);
}

TEST_CASE("grad check: conv1d variants") {
  std::mt19937_64 rng(11);
  struct Case {
    std::size_t cin, cout, k;
    Conv1dOptions opt;
  };
  const Case cases[] = {
      {2, 3, 3, {.stride = 1, .padding = 1}},
      {2, 3, 3, {.stride = 2, .padding = 1}},
      {2, 2, 3, {.stride = 1, .padding = 2, .dilation = 2}},
      {4, 4, 7, {.stride = 1, .padding = 3, .dilation = 1, .groups = 4}},
      {4, 6, 1, {.stride = 1, .padding = 0, .dilation = 1, .groups = 2}},
      {3, 2, 5, {.stride = 3, .padding = 0}},
  };
  for (const auto& c : cases) {
    Td x = rand_tensor({2, c.cin, 11}, rng);
    Td w = rand_tensor({c.cout, c.cin / c.opt.groups, c.k}, rng);
    Td b = rand_tensor({c.cout}, rng);
    CHECK(check([&] { return probe(conv1d(x, w, b, c.opt)); }, {x, w, b}) < 1e-4);
  }
}

// Wide im2col (560 rows) and long GEMMs reach the blocked BLAS kernels that tiny shapes never touch.
TEST_CASE("grad check: conv1d at model width") {
  std::mt19937_64 rng(21);
  Td x = rand_tensor({1, 80, 4}, rng);
  Td w = rand_tensor({64, 80, 7}, rng);
  Td b = rand_tensor({64}, rng);
  const auto r = grad_check([&] { return probe(conv1d(x, w, b, {.padding = 3})); }, {x, w, b},
                            {.eps = 1e-6, .samples = 300, .seed = 4});
  CHECK(r.max_rel_error < 1e-4);

  Td a = rand_tensor({160, 160}, rng), m = rand_tensor({160, 160}, rng);
  const auto rm = grad_check([&] { return probe(matmul(a, m)); }, {a, m}, {.eps = 1e-6, .samples = 300, .seed = 5});
  CHECK(rm.max_rel_error < 1e-4);
}

TEST_CASE("grad check: conv2d variants") {
  std::mt19937_64 rng(12);
  const Conv2dOptions opts[] = {{1, 1, 1, 1}, {3, 1, 2, 0}, {1, 2, 1, 4}};
  const std::size_t kh[] = {3, 5, 3}, kw[] = {3, 1, 9};
  for (int i = 0; i < 3; ++i) {
    Td x = rand_tensor({2, 2, 9, 7}, rng);
    Td w = rand_tensor({3, 2, kh[i], kw[i]}, rng);
    Td b = rand_tensor({3}, rng);
    CHECK(check([&] { return probe(conv2d(x, w, b, opts[i])); }, {x, w, b}) < 1e-4);
  }
}

TEST_CASE("grad check: stft, istft, magnitude") {
  std::mt19937_64 rng(13);
  dsp::StftConfig cfg{.n_fft = 16, .hop = 4, .win_length = 16};
  Td x = rand_tensor({2, 24}, rng);
  CHECK(check([&] {
          auto z = stft(x, cfg);
          return add(probe(z.re, 1), probe(z.im, 2));
        },
        {x}) < 1e-4);
  CHECK(check([&] { return probe(magnitude(stft(x, cfg))); }, {x}) < 1e-4);
  Td re = rand_tensor({2, 6, 9}, rng);
  Td im = rand_tensor({2, 6, 9}, rng);
  CHECK(check([&] { return probe(istft(re, im, cfg)); }, {re, im}) < 1e-4);
}

TEST_CASE("float and double forward agree") {
  std::mt19937_64 rng(14);
  Td x = rand_tensor({1, 3, 20}, rng, -1, 1, false);
  Td w = rand_tensor({3, 1, 7}, rng, -1, 1, false);
  auto to_f = [](const Td& t) {
    return Tensor<float>(t.shape(), std::vector<float>(t.values().begin(), t.values().end()));
  };
  Td yd = gelu(conv1d(x, w, Td(), {.padding = 3, .groups = 3}));
  auto yf = gelu(conv1d(to_f(x), to_f(w), Tensor<float>(), {.padding = 3, .groups = 3}));
  for (std::size_t i = 0; i < yd.numel(); ++i) CHECK(yf.values()[i] == doctest::Approx(yd.values()[i]).epsilon(1e-5));
}

TEST_CASE("relu and clamp_min propagate NaN") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ad::Tensor<double> x({3}, {nan, -1.0, 2.0});
  const auto r = ad::relu(x).values();
  CHECK(std::isnan(r[0]));
  CHECK(r[1] == 0.0);
  const auto c = ad::clamp_min(x, 0.5).values();
  CHECK(std::isnan(c[0]));
  CHECK(c[1] == 0.5);
  CHECK(c[2] == 2.0);
}
