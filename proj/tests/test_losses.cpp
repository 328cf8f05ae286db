#include "proto_ood/losses.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "proto_ood/errors.hpp"
#include "proto_ood/ops.hpp"
#include "proto_ood/rng.hpp"

using namespace proto_ood;

namespace {

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

}  // namespace

TEST_CASE("diversity loss hand values") {
  Tape tape(false);
  Tensor identical = Tensor::from_values({2, 2}, {1, 0, 1, 0});
  CHECK(diversity_loss(identical, tape).value() == doctest::Approx(0.5).epsilon(1e-12));

  Tensor orthogonal = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  CHECK(diversity_loss(orthogonal, tape).value() == doctest::Approx(0.0).epsilon(1e-12));

  // Three rows with all pairwise cosines 0.5 -> (1/9) * 6 * 0.25 = 1/6.
  const double s = std::sqrt(3.0) / 2.0;
  Tensor third = Tensor::from_values({3, 3}, {1, 0, 0, 0.5, s, 0, 0.5, s / 3.0, std::sqrt(2.0 / 3.0)});
  CHECK(diversity_loss(third, tape).value() == doctest::Approx(1.0 / 6.0).epsilon(1e-9));

  Tensor lone = Tensor::from_values({1, 2}, {3, 4});
  CHECK(diversity_loss(lone, tape).value() == 0.0);

  Tensor degenerate = Tensor::from_values({2, 2}, {1, 0, 0, 0});
  CHECK_THROWS_AS(diversity_loss(degenerate, tape), ValueError);
}

TEST_CASE("diversity loss is invariant to row permutation and row rescaling") {
  Rng rng(3);
  Tape tape(false);
  Tensor p = Tensor::gaussian({4, 6}, 1.0, rng);
  const double base = diversity_loss(p, tape).value();

  Tensor permuted = Tensor::zeros({4, 6});
  const Index perm[4] = {2, 0, 3, 1};
  for (Index r = 0; r < 4; ++r) {
    permuted.values().segment(r * 6, 6) = p.values().segment(perm[r] * 6, 6);
  }
  CHECK(diversity_loss(permuted, tape).value() == doctest::Approx(base).epsilon(1e-12));

  Tensor rescaled = p.clone();
  rescaled.values().segment(6, 6) *= 7.5;
  CHECK(diversity_loss(rescaled, tape).value() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("match loss hand values") {
  Tape tape(false);
  Tensor z = Tensor::from_values({2}, {1, 0});

  Tensor single = Tensor::from_values({1, 2}, {0.3, 0.4});
  CHECK(match_loss(z, single, 0, 0.01, tape).value() == 0.0);

  // Equidistant prototypes: any target gives ln 2 at any temperature.
  Tensor symmetric = Tensor::from_values({2, 2}, {1, 1, 1, -1});
  CHECK(match_loss(z, symmetric, 0, 0.01, tape).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(match_loss(z, symmetric, 1, 0.01, tape).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // cos(z, p_target) = 1, cos(z, p_other) = 0, tau = 1.
  Tensor axes = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  CHECK(match_loss(z, axes, 0, 1.0, tape).value() ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));

  CHECK_THROWS_AS(match_loss(z, axes, 2, 1.0, tape), IndexError);
  CHECK_THROWS_AS(match_loss(z, axes, 0, 0.0, tape), ConfigError);
}

TEST_CASE("match loss probabilities normalize and preserve cosine ranking") {
  Rng rng(7);
  Tape tape(false);
  for (int trial = 0; trial < 30; ++trial) {
    const Index k = 2 + static_cast<Index>(rng.next_below(5));
    const Index d = 4;
    Tensor z = Tensor::gaussian({d}, 1.0, rng);
    Tensor p = Tensor::gaussian({k, d}, 1.0, rng);
    const double tau = trial % 2 == 0 ? 0.01 : 1.0;

    double prob_sum = 0.0;
    double best_cos = -2.0;
    Index best_cos_idx = -1;
    double best_loss = 1e300;
    Index best_loss_idx = -1;
    for (Index t = 0; t < k; ++t) {
      const double loss = match_loss(z, p, t, tau, tape).value();
      prob_sum += std::exp(-loss);
      const double c = cosine(z, row(p, t, tape), tape).value();
      if (c > best_cos) {
        best_cos = c;
        best_cos_idx = t;
      }
      if (loss < best_loss) {
        best_loss = loss;
        best_loss_idx = t;
      }
    }
    CHECK(std::abs(prob_sum - 1.0) < 1e-12);
    CHECK(best_cos_idx == best_loss_idx);
  }
}

TEST_CASE("joint loss composition") {
  Tape tape(false);
  Tensor match = Tensor::scalar(std::log(2.0));
  Tensor div = Tensor::scalar(0.5);
  CHECK(joint_loss(match, div, 0.0, tape).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(joint_loss(match, div, 0.2, tape).value() == doctest::Approx(0.793147).epsilon(1e-6));
  Tensor zero_div = Tensor::scalar(0.0);
  CHECK(joint_loss(match, zero_div, 1.0, tape).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  Tensor bad = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(joint_loss(bad, div, 0.2, tape), ValueError);
}

TEST_CASE("discriminative loss hand values") {
  Tape tape(false);
  LinearHead head = LinearHead::zeros(4, 3);
  Tensor z = Tensor::from_values({3}, {0.2, -0.1, 0.4});
  CHECK(discriminative_loss(z, head, 1, tape).value() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Head picked so logits are (1, 0).
  LinearHead pair = LinearHead::zeros(2, 2);
  pair.weight.values()[0] = 1.0;  // w[0] = (1, 0)
  Tensor unit = Tensor::from_values({2}, {1, 0});
  CHECK(discriminative_loss(unit, pair, 0, tape).value() ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(11);

  for (int trial = 0; trial < 5; ++trial) {
    Tensor p = Tensor::gaussian({3, 5}, 1.0, rng, true);
    std::vector<Tensor> leaves{p};
    auto f = [&](Tape& t) { return diversity_loss(p, t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }

  for (int trial = 0; trial < 5; ++trial) {
    Tensor z = Tensor::gaussian({5}, 1.0, rng, true);
    Tensor p = Tensor::gaussian({3, 5}, 1.0, rng, true);
    std::vector<Tensor> leaves{z, p};
    auto f = [&](Tape& t) { return match_loss(z, p, 1, 0.5, t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }

  for (int trial = 0; trial < 5; ++trial) {
    Tensor z = Tensor::gaussian({4}, 1.0, rng, true);
    LinearHead head;
    head.weight = Tensor::gaussian({3, 4}, 1.0, rng, true);
    head.bias = Tensor::gaussian({3}, 1.0, rng, true);
    std::vector<Tensor> leaves{z, head.weight, head.bias};
    auto f = [&](Tape& t) { return discriminative_loss(z, head, 2, t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }

  {
    Tensor match = Tensor::gaussian({1}, 1.0, rng, true);
    Tensor div = Tensor::gaussian({1}, 1.0, rng, true);
    std::vector<Tensor> leaves{match, div};
    auto f = [&](Tape& t) { return joint_loss(match, div, 0.2, t); };
    CHECK(fd_max_err(f, leaves) < 1e-4);
  }
}
