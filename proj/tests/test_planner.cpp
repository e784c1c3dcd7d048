#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "lbow/config.hpp"
#include "lbow/planner.hpp"
#include "support.hpp"

using namespace lbow;
using lbow::test::random_mat;
using lbow::test::random_prob_vec;

namespace {

// Planner stack of a small model for tests.
struct SmallPlanner {
  ad::ParameterStore store;
  Encoder enc;
  NeighborHeads heads;
  SmallPlanner(int vocab, int emb, int hidden, int l, uint64_t seed = 1) {
    Rng rng(seed);
    enc.init(store, vocab, emb, hidden, 1, false, rng);
    heads.init(store, vocab, hidden, l, rng);
  }
};

NeighborProbs random_probs(int m, int l, int vocab, Rng& rng, bool peaked) {
  NeighborProbs probs;
  for (int i = 0; i < m; ++i) {
    std::vector<Eigen::VectorXd> row;
    for (int j = 0; j < l; ++j) {
      Eigen::VectorXd p = random_prob_vec(vocab, rng).col(0);
      if (peaked && rng.uniform01() < 0.5) {
        int at = rng.uniform_int(vocab);
        p *= 0.2;
        p(at) += 0.8;
        p /= p.sum();
      }
      row.push_back(p);
    }
    probs.push_back(std::move(row));
  }
  return probs;
}

// Independent reimplementation of the mode rule, for the oracle check.
int brute_force_modes(const NeighborProbs& probs, double threshold) {
  std::set<int> found;
  for (const auto& row : probs) {
    for (const auto& p : row) {
      for (int w = 0; w < p.size(); ++w) {
        bool is_max = true;
        for (int u = 0; u < p.size(); ++u) {
          if (p(u) > p(w) || (p(u) == p(w) && u < w)) {
            is_max = (u == w);
            if (!is_max) break;
          }
        }
        if (is_max && p(w) > threshold) found.insert(w);
      }
    }
  }
  return static_cast<int>(found.size());
}

}  // namespace

TEST_CASE("encoder is deterministic and ignores trailing pads") {
  SmallPlanner m(20, 6, 8, 2);
  std::vector<int> ids{4, 7, 9};

  ad::Tape t1, t2;
  EncoderOutput a = m.enc.encode(t1, ids);
  EncoderOutput b = m.enc.encode(t2, ids);
  CHECK((t1.val(a.final_h[0]) - t2.val(b.final_h[0])).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("appending PAD positions leaves the code unchanged") {
    std::vector<int> padded{4, 7, 9, 0, 0};
    std::vector<uint8_t> mask{1, 1, 1, 0, 0};
    ad::Tape t3;
    EncoderOutput c = m.enc.encode(t3, padded, mask);
    CHECK(c.true_len == 3);
    CHECK(c.states.size() == 5);
    CHECK((t1.val(a.final_h[0]) - t3.val(c.final_h[0])).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single-token input gives one real state") {
    ad::Tape t3;
    EncoderOutput c = m.enc.encode(t3, std::vector<int>{5});
    CHECK(c.true_len == 1);
    CHECK(c.states.size() == 1);
  }
  SUBCASE("all-pad input is an error") {
    std::vector<int> pads{0, 0};
    std::vector<uint8_t> mask{0, 0};
    ad::Tape t3;
    CHECK_THROWS(m.enc.encode(t3, pads, mask));
  }
}

TEST_CASE("neighbor distributions are normalized per slice") {
  SmallPlanner m(30, 6, 8, 3);
  ad::Tape t;
  EncoderOutput enc = m.enc.encode(t, std::vector<int>{1, 2, 3, 4});
  NeighborDists nd = m.heads.apply(t, enc);
  REQUIRE(nd.slices.size() == 4);
  REQUIRE(nd.slices[0].size() == 3);
  for (const auto& row : nd.slices)
    for (ad::Var s : row) {
      CHECK(t.val(s).sum() == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(t.val(s).minCoeff() >= 0.0);
    }
}

TEST_CASE("mix averages the slices") {
  SUBCASE("degenerate single slice") {
    ad::Tape t;
    NeighborDists nd;
    nd.l = 1;
    Eigen::MatrixXd p(3, 1);
    p << 0.2, 0.5, 0.3;
    nd.slices.push_back({t.variable(p)});
    ad::Var pi = mix_slices(t, nd);
    CHECK((t.val(pi) - p).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two one-hot slices average to (0.5, 0.5, 0)") {
    ad::Tape t;
    NeighborDists nd;
    nd.l = 2;
    Eigen::MatrixXd a(3, 1), b(3, 1);
    a << 1, 0, 0;
    b << 0, 1, 0;
    nd.slices.push_back({t.variable(a), t.variable(b)});
    const ad::Mat pi = t.val(mix_slices(t, nd));
    CHECK(pi(0, 0) == doctest::Approx(0.5));
    CHECK(pi(1, 0) == doctest::Approx(0.5));
    CHECK(pi(2, 0) == doctest::Approx(0.0));
  }
  SUBCASE("random slices stay on the simplex") {
    Rng rng(5);
    SmallPlanner m(25, 6, 8, 2);
    for (int rep = 0; rep < 20; ++rep) {
      ad::Tape t;
      int len = 1 + rng.uniform_int(6);
      std::vector<int> ids;
      for (int i = 0; i < len; ++i) ids.push_back(rng.uniform_int(25));
      EncoderOutput enc = m.enc.encode(t, ids);
      ad::Var pi = mix_slices(t, m.heads.apply(t, enc));
      CHECK(t.val(pi).sum() == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(t.val(pi).minCoeff() >= 0.0);
    }
  }
  SUBCASE("no slices is an error") {
    ad::Tape t;
    NeighborDists nd;
    CHECK_THROWS(mix_slices(t, nd));
  }
}

TEST_CASE("bow_loss closed forms") {
  SUBCASE("uniform over V=4 with two targets") {
    ad::Tape t;
    Eigen::MatrixXd pi(4, 1);
    pi.setConstant(0.25);
    ad::Var loss = bow_loss(t, t.variable(pi), std::vector<int>{0, 1}, 0.0);
    CHECK(t.val(loss)(0, 0) == doctest::Approx(2.7726).epsilon(1e-4));
  }
  SUBCASE("all mass on the single target gives zero loss") {
    ad::Tape t;
    Eigen::MatrixXd pi(3, 1);
    pi << 0, 1, 0;
    ad::Var loss = bow_loss(t, t.variable(pi), std::vector<int>{1}, 0.0);
    CHECK(t.val(loss)(0, 0) == 0.0);
  }
  SUBCASE("empty bag is an error") {
    ad::Tape t;
    ad::Var pi = t.variable(Eigen::MatrixXd::Constant(3, 1, 1.0 / 3));
    CHECK_THROWS(bow_loss(t, pi, std::vector<int>{}));
  }
}

TEST_CASE("bow_loss ignores mass moved among non-target ids, bit for bit") {
  Rng rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::MatrixXd pi = random_prob_vec(10, rng);
    std::vector<int> bow{2, 5};
    ad::Tape t1;
    double before = t1.val(bow_loss(t1, t1.variable(pi), bow))(0, 0);
    // transfer random mass between two non-target coordinates
    int a = 0, b = 7;
    double delta = rng.uniform(0.0, pi(a, 0));
    Eigen::MatrixXd moved = pi;
    moved(a, 0) -= delta;
    moved(b, 0) += delta;
    ad::Tape t2;
    double after = t2.val(bow_loss(t2, t2.variable(moved), bow))(0, 0);
    CHECK(before == after);  // exact
  }
}

TEST_CASE("bow_loss gradient is zero at non-target coordinates") {
  Rng rng(19);
  Eigen::MatrixXd pi = random_prob_vec(12, rng);
  ad::Tape t;
  ad::Var v = t.variable(pi);
  std::vector<int> bow{1, 3, 8};
  t.backward(bow_loss(t, v, bow));
  const ad::Mat& g = t.grad(v);
  for (int i = 0; i < 12; ++i) {
    bool is_target = i == 1 || i == 3 || i == 8;
    if (is_target)
      CHECK(g(i, 0) < 0.0);
    else
      CHECK(g(i, 0) == 0.0);
  }
}

TEST_CASE("analytic planner gradient matches finite differences (V=20, m=3, l=2)") {
  SmallPlanner m(20, 5, 6, 2, 7);
  std::vector<int> src{3, 11, 17};
  std::vector<int> bow{2, 9, 14};

  // Check d bow_loss / d head logits via the head weight matrices.
  ad::Tape tape;
  EncoderOutput enc = m.enc.encode(tape, src);
  ad::Var pi = mix_slices(tape, m.heads.apply(tape, enc));
  ad::Var loss = bow_loss(tape, pi, bow);
  tape.backward(loss);

  auto loss_value = [&]() {
    ad::Tape t2;
    EncoderOutput e2 = m.enc.encode(t2, src);
    ad::Var pi2 = mix_slices(t2, m.heads.apply(t2, e2));
    return t2.val(bow_loss(t2, pi2, bow))(0, 0);
  };

  Rng pick_rng(3);
  double max_rel = 0;
  for (const auto& p : m.store.all()) {
    for (int probe = 0; probe < 4; ++probe) {
      int r = pick_rng.uniform_int(static_cast<int>(p->value.rows()));
      int c = pick_rng.uniform_int(static_cast<int>(p->value.cols()));
      double h = 1e-5;
      double orig = p->value(r, c);
      p->value(r, c) = orig + h;
      double up = loss_value();
      p->value(r, c) = orig - h;
      double down = loss_value();
      p->value(r, c) = orig;
      double numeric = (up - down) / (2 * h);
      double analytic = p->grad(r, c);
      double rel = std::abs(numeric - analytic) /
                   std::max({1.0, std::abs(numeric), std::abs(analytic)});
      max_rel = std::max(max_rel, rel);
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("count_modes matches the spec examples") {
  SUBCASE("uniform slices over V=100 have no modes") {
    NeighborProbs probs{{Eigen::VectorXd::Constant(100, 0.01)}};
    CHECK(count_modes(probs) == 0);
  }
  SUBCASE("a one-hot slice is one mode") {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(10);
    p(7) = 1.0;
    NeighborProbs probs{{p}};
    CHECK(count_modes(probs) == 1);
  }
  SUBCASE("two slices peaked at the same id count once") {
    Eigen::VectorXd p = Eigen::VectorXd::Constant(10, 0.3 / 9);
    p(7) = 0.7;
    NeighborProbs probs{{p, p}};
    CHECK(count_modes(probs) == 1);
    CHECK(brute_force_modes(probs, 0.5) == 1);
  }
}

TEST_CASE("count_modes agrees with a brute-force reimplementation") {
  Rng rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    NeighborProbs probs = random_probs(1 + rng.uniform_int(5), 1 + rng.uniform_int(3),
                                       4 + rng.uniform_int(20), rng, true);
    CHECK(count_modes(probs) == brute_force_modes(probs, 0.5));
  }
}

TEST_CASE("mask invariance: pads change neither mix nor count_modes") {
  SmallPlanner m(25, 6, 8, 2);
  std::vector<int> ids{4, 9, 13};
  ad::Tape t1;
  EncoderOutput e1 = m.enc.encode(t1, ids);
  NeighborDists n1 = m.heads.apply(t1, e1);
  ad::Mat pi1 = t1.val(mix_slices(t1, n1));
  int modes1 = count_modes(neighbor_probs(t1, n1), 0.0);  // low threshold to count something

  std::vector<int> padded{4, 9, 13, 0, 0, 0};
  std::vector<uint8_t> mask{1, 1, 1, 0, 0, 0};
  ad::Tape t2;
  EncoderOutput e2 = m.enc.encode(t2, padded, mask);
  NeighborDists n2 = m.heads.apply(t2, e2);
  ad::Mat pi2 = t2.val(mix_slices(t2, n2));
  int modes2 = count_modes(neighbor_probs(t2, n2), 0.0);

  CHECK((pi1 - pi2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(modes1 == modes2);
}
