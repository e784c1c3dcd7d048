#include "lbow/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lbow/common.hpp"

namespace lbow {

SampleMode parse_sample_mode(const std::string& name) {
  if (name == "gumbel") return SampleMode::gumbel;
  if (name == "deterministic") return SampleMode::deterministic;
  throw UsageError("unknown sampling mode: " + name);
}

Weighting parse_weighting(const std::string& name) {
  if (name == "base") return Weighting::base;
  if (name == "perturbed") return Weighting::perturbed;
  throw UsageError("unknown weighting: " + name);
}

std::string to_string(SampleMode m) {
  return m == SampleMode::gumbel ? "gumbel" : "deterministic";
}

std::string to_string(Weighting w) { return w == Weighting::base ? "base" : "perturbed"; }

Eigen::VectorXd gumbel_noise(int n, Rng& rng) {
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g(i) = rng.gumbel();
  return g;
}

std::vector<int> top_k_ids(const Eigen::VectorXd& scores, int k) {
  std::vector<int> idx(static_cast<size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
  idx.resize(static_cast<size_t>(k));
  return idx;
}

namespace {

Eigen::VectorXd softmax_vec(const Eigen::VectorXd& x) {
  double mx = x.maxCoeff();
  Eigen::ArrayXd e = (x.array() - mx).exp();
  return (e / e.sum()).matrix();
}

SampledBag select(const Eigen::VectorXd& pi, int k, const Eigen::VectorXd* noise,
                  Weighting weighting) {
  if (k < 1) throw std::invalid_argument("sample_bag: k must be >= 1");
  int support = 0;
  for (Eigen::Index i = 0; i < pi.size(); ++i)
    if (pi(i) > 0.0) ++support;
  if (k > support)
    throw std::invalid_argument("sample_bag: k = " + std::to_string(k) +
                                " exceeds support size " + std::to_string(support) + " by " +
                                std::to_string(k - support));

  Eigen::VectorXd scores(pi.size());
  if (noise) {
    for (Eigen::Index i = 0; i < pi.size(); ++i)
      scores(i) = std::log(pi(i)) + (*noise)(i);  // log(0) = -inf never selected
  } else {
    scores = pi;
  }

  SampledBag bag;
  bag.mode = noise ? SampleMode::gumbel : SampleMode::deterministic;
  bag.ids = top_k_ids(scores, k);
  bag.weights.resize(k);
  if (weighting == Weighting::base || !noise) {
    for (int j = 0; j < k; ++j) bag.weights(j) = pi(bag.ids[static_cast<size_t>(j)]);
    if (weighting == Weighting::perturbed && !noise) {
      // softmax(log pi) with zero noise is pi itself; nothing to do
    }
  } else {
    Eigen::VectorXd perturbed = softmax_vec(scores);
    for (int j = 0; j < k; ++j) bag.weights(j) = perturbed(bag.ids[static_cast<size_t>(j)]);
  }
  if (noise) {
    bag.noise.reserve(static_cast<size_t>(k));
    for (int id : bag.ids) bag.noise.push_back((*noise)(id));
  }
  return bag;
}

}  // namespace

SampledBag sample_bag(const Eigen::VectorXd& pi, int k, SampleMode mode, Weighting weighting,
                      Rng* rng) {
  if (mode == SampleMode::gumbel) {
    if (!rng) throw std::invalid_argument("sample_bag: gumbel mode needs an rng");
    Eigen::VectorXd g = gumbel_noise(static_cast<int>(pi.size()), *rng);
    return select(pi, k, &g, weighting);
  }
  return select(pi, k, nullptr, weighting);
}

SampledBag sample_bag_with_noise(const Eigen::VectorXd& pi, int k, const Eigen::VectorXd& noise,
                                 Weighting weighting) {
  return select(pi, k, &noise, weighting);
}

ad::Var straight_through_weights(ad::Tape& t, ad::Var pi, const std::vector<int>& ids,
                                 const Eigen::VectorXd& noise, Weighting weighting) {
  if (weighting == Weighting::base) return t.gather(pi, ids);
  ad::Var log_pi = t.log_eps(pi, 1e-30);
  ad::Var perturbed = t.add(log_pi, t.constant(noise));
  return t.gather(t.softmax(perturbed), ids);
}

double plackett_luce_prob(const Eigen::VectorXd& pi, std::span<const int> ordered_ids) {
  double prob = 1.0;
  double remaining = 1.0;
  for (size_t s = 0; s < ordered_ids.size(); ++s) {
    if (remaining < 1e-300)
      throw std::domain_error("plackett_luce_prob: denominator underflow at step " +
                              std::to_string(s));
    prob *= pi(ordered_ids[s]) / remaining;
    remaining -= pi(ordered_ids[s]);
  }
  return prob;
}

}  // namespace lbow
