#pragma once

#include <span>
#include <string>
#include <vector>

#include "lbow/rng.hpp"
#include "lbow/tape.hpp"

namespace lbow {

enum class SampleMode { gumbel, deterministic };
enum class Weighting { base, perturbed };

SampleMode parse_sample_mode(const std::string& name);
Weighting parse_weighting(const std::string& name);
std::string to_string(SampleMode m);
std::string to_string(Weighting w);

// A drawn bag: k distinct word ids with decoding weights. noise holds the
// Gumbel draws at the selected ids (empty in deterministic mode).
struct SampledBag {
  std::vector<int> ids;
  Eigen::VectorXd weights;
  std::vector<double> noise;
  SampleMode mode = SampleMode::deterministic;
};

// One Gumbel(0,1) draw per entry.
Eigen::VectorXd gumbel_noise(int n, Rng& rng);

// Indices of the k largest scores; ties broken toward the lower id.
std::vector<int> top_k_ids(const Eigen::VectorXd& scores, int k);

// Sample k ids without replacement from pi. In gumbel mode the scores are
// log pi + g; in deterministic mode the scores are pi itself (g = 0).
// Throws if k exceeds the support size of pi.
SampledBag sample_bag(const Eigen::VectorXd& pi, int k, SampleMode mode,
                      Weighting weighting, Rng* rng);

// As sample_bag but with caller-provided noise (one entry per vocab id),
// for reproducing a draw.
SampledBag sample_bag_with_noise(const Eigen::VectorXd& pi, int k,
                                 const Eigen::VectorXd& noise, Weighting weighting);

// Differentiable bag weights on the tape: gradients flow into whatever
// produced pi, while the discrete ids stay fixed. noise must have one
// entry per vocab id (all zero for deterministic selection).
// base: pi at the selected ids. perturbed: softmax(log pi + noise) at the
// selected ids.
ad::Var straight_through_weights(ad::Tape& t, ad::Var pi, const std::vector<int>& ids,
                                 const Eigen::VectorXd& noise, Weighting weighting);

// Probability of drawing exactly this ordered sequence when sampling
// without replacement from pi. Verification oracle for the Gumbel top-k
// path; not used by the model itself.
double plackett_luce_prob(const Eigen::VectorXd& pi, std::span<const int> ordered_ids);

}  // namespace lbow
