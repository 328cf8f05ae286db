#include "proto_ood/ops.hpp"

#include <cmath>

#include "doctest.h"
#include "proto_ood/errors.hpp"
#include "proto_ood/rng.hpp"

using namespace proto_ood;

namespace {

// Central finite differences against the taped gradients. Relative error with
// a 0.01 floor, so values near zero are held to an absolute 1e-6.
template <typename F>
double fd_max_err(F&& f, std::vector<Tensor>& leaves, double h = 1e-3) {
  Tape tape;
  Tensor loss = f(tape);
  tape.backward(loss);
  double max_err = 0.0;
  for (Tensor& leaf : leaves) {
    for (Index i = 0; i < leaf.numel(); ++i) {
      const double orig = leaf.values()[i];
      leaf.values()[i] = orig + h;
      Tape tp(false);
      const double fp = f(tp).value();
      leaf.values()[i] = orig - h;
      Tape tm(false);
      const double fm = f(tm).value();
      leaf.values()[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double analytic = leaf.grad()[i];
      const double err =
          std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 0.01});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = true) {
  return Tensor::gaussian(shape, 1.0, rng, requires_grad);
}

}  // namespace

TEST_CASE("matmul identity and hand product") {
  Tape tape(false);
  Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  Tensor prod = matmul(eye, eye, tape);
  CHECK(prod(0, 0) == 1.0);
  CHECK(prod(0, 1) == 0.0);
  CHECK(prod(1, 1) == 1.0);

  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values({2, 1}, {1, 1});
  Tensor c = matmul(a, b, tape);
  CHECK(c(0, 0) == 3.0);
  CHECK(c(1, 0) == 7.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 2});
  try {
    matmul(a, b, tape);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    std::vector<Tensor> leaves{a, b};
    auto f = [&](Tape& t) { return sum(matmul(a, b, t), t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }
}

TEST_CASE("cosine hand values") {
  Tape tape(false);
  Tensor e1 = Tensor::from_values({2}, {1, 0});
  Tensor e2 = Tensor::from_values({2}, {0, 1});
  Tensor d = Tensor::from_values({2}, {1, 1});
  CHECK(cosine(e1, e1, tape).value() == 1.0);
  CHECK(cosine(e1, e2, tape).value() == 0.0);
  CHECK(cosine(d, e1, tape).value() == doctest::Approx(0.70710678).epsilon(1e-8));
}

TEST_CASE("cosine of a vector with itself is exactly one") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor v = random_tensor({7}, rng, false);
    Tape tape(false);
    CHECK(cosine(v, v, tape).value() == 1.0);
  }
}

TEST_CASE("cosine refuses near-zero vectors") {
  Tape tape;
  Tensor z = Tensor::from_values({2}, {0, 1e-13});
  Tensor v = Tensor::from_values({2}, {1, 0});
  CHECK_THROWS_AS(cosine(z, v, tape), ValueError);
  CHECK_THROWS_AS(cosine(v, z, tape), ValueError);
}

TEST_CASE("cosine gradients match finite differences for both arguments") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor a = random_tensor({6}, rng);
    Tensor b = random_tensor({6}, rng);
    std::vector<Tensor> leaves{a, b};
    auto f = [&](Tape& t) { return cosine(a, b, t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }
}

TEST_CASE("softmax cross entropy hand values and stability") {
  Tape tape(false);
  Tensor uniform = Tensor::from_values({2}, {0, 0});
  CHECK(softmax_cross_entropy(uniform, 0, tape).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor huge = Tensor::from_values({2}, {1000, 0});
  const double loss = softmax_cross_entropy(huge, 0, tape).value();
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));

  Tensor pair = Tensor::from_values({2}, {1, 0});
  CHECK(softmax_cross_entropy(pair, 0, tape).value() ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_cross_entropy(pair, 2, tape), IndexError);
  CHECK_THROWS_AS(softmax_cross_entropy(pair, -1, tape), IndexError);
}

TEST_CASE("softmax cross entropy is shift invariant") {
  Rng rng(17);
  Tape tape(false);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits = random_tensor({5}, rng, false);
    Tensor shifted = Tensor::from_array({5}, logits.values() + 37.25, false);
    const double a = softmax_cross_entropy(logits, trial % 5, tape).value();
    const double b = softmax_cross_entropy(shifted, trial % 5, tape).value();
    CHECK(std::abs(a - b) < 1e-12);
  }
}

TEST_CASE("softmax cross entropy gradient matches finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor logits = random_tensor({4}, rng);
    std::vector<Tensor> leaves{logits};
    auto f = [&](Tape& t) { return softmax_cross_entropy(logits, 2, t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }
}

TEST_CASE("softmax_causal normalizes prefixes and zeroes the strict upper triangle") {
  Rng rng(29);
  Tape tape(false);
  Tensor s = random_tensor({4, 4}, rng, false);
  Tensor p = softmax_causal(s, tape);
  for (Index i = 0; i < 4; ++i) {
    double row_sum = 0.0;
    for (Index j = 0; j < 4; ++j) {
      if (j > i) CHECK(p(i, j) == 0.0);
      row_sum += p(i, j);
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax_causal gradient matches finite differences") {
  Rng rng(31);
  Tensor s = random_tensor({4, 4}, rng);
  Tensor w = random_tensor({4, 4}, rng, false);
  std::vector<Tensor> leaves{s};
  auto f = [&](Tape& t) { return sum(mul(softmax_causal(s, t), w, t), t); };
  CHECK(fd_max_err(f, leaves) < 1e-4);
}

TEST_CASE("rms_norm gradient matches finite differences") {
  Rng rng(37);
  Tensor x = random_tensor({3, 5}, rng);
  Tensor g = random_tensor({5}, rng);
  Tensor w = random_tensor({3, 5}, rng, false);
  std::vector<Tensor> leaves{x, g};
  auto f = [&](Tape& t) { return sum(mul(rms_norm(x, g, 1e-5, t), w, t), t); };
  CHECK(fd_max_err(f, leaves) < 1e-4);
}

TEST_CASE("silu gradient matches finite differences") {
  Rng rng(41);
  Tensor x = random_tensor({2, 4}, rng);
  std::vector<Tensor> leaves{x};
  auto f = [&](Tape& t) { return sum(silu(x, t), t); };
  CHECK(fd_max_err(f, leaves) < 1e-4);
}

TEST_CASE("structural ops route gradients through slices and concatenations") {
  Rng rng(43);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({2, 4}, rng);
  Tensor v = random_tensor({4}, rng);
  std::vector<Tensor> leaves{a, b, v};
  auto f = [&](Tape& t) {
    Tensor stacked = concat_rows({a, v, b}, t);          // 6x4
    Tensor left = slice_cols(stacked, 0, 2, t);          // 6x2
    Tensor right = slice_cols(stacked, 2, 2, t);         // 6x2
    Tensor wide = concat_cols({right, left}, t);         // 6x4
    Tensor r = row(transpose(wide, t), 1, t);            // length 6
    Tensor q = reshape(r, {6}, t);
    return cosine(q, Tensor::from_values({6}, {1, 2, 3, 4, 5, 6}), t);
  };
  CHECK(fd_max_err(f, leaves) < 1e-4);
}

TEST_CASE("backward of cosine against a constant matches finite differences") {
  Rng rng(47);
  Tensor x = random_tensor({8}, rng);
  Tensor c = random_tensor({8}, rng, false);
  std::vector<Tensor> leaves{x};
  auto f = [&](Tape& t) { return cosine(x, c, t); };
  CHECK(fd_max_err(f, leaves) < 1e-4);
}

TEST_CASE("stack and mean of scalars") {
  Rng rng(53);
  Tensor a = random_tensor({1}, rng);
  Tensor b = random_tensor({1}, rng);
  std::vector<Tensor> leaves{a, b};
  auto f = [&](Tape& t) { return mean_scalars({mul(a, a, t), mul(a, b, t)}, t); };
  CHECK(fd_max_err(f, leaves) < 1e-4);

  Tape tape(false);
  Tensor m = mean_scalars({Tensor::scalar(1.0), Tensor::scalar(3.0)}, tape);
  CHECK(m.value() == 2.0);
}
