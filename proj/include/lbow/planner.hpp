#pragma once

#include <set>
#include <span>
#include <vector>

#include "lbow/nn.hpp"
#include "lbow/tape.hpp"

namespace lbow {

// Per-position encoder states plus the final summary code. States exist
// for every input position; padded positions hold zero vectors and are
// listed in pad_mask so downstream sums can skip them.
struct EncoderOutput {
  std::vector<ad::Var> states;       // one per input position, H x 1
  std::vector<uint8_t> pad_mask;     // 1 = real token
  std::vector<ad::Var> final_h;      // per layer, at the last unpadded position
  std::vector<ad::Var> final_c;
  int true_len = 0;
};

class Encoder {
 public:
  void init(ad::ParameterStore& store, int vocab, int emb, int hidden, int layers,
            bool residual, Rng& rng);
  // Trailing positions with mask 0 are not fed to the LSTM, so pads never
  // influence the states or the code.
  EncoderOutput encode(ad::Tape& t, std::span<const int> ids,
                       std::span<const uint8_t> pad_mask) const;
  EncoderOutput encode(ad::Tape& t, std::span<const int> ids) const;

  ad::Parameter* embeddings() const { return emb_; }
  int hidden() const { return lstm_.hidden(); }
  int layer_count() const { return lstm_.layer_count(); }

 private:
  ad::Parameter* emb_ = nullptr;  // E x V
  LstmStack lstm_;
};

// l softmax heads over each unpadded encoder state. slices[i][j] is a
// distribution over the vocabulary for the i-th unpadded position.
struct NeighborDists {
  std::vector<std::vector<ad::Var>> slices;
  int l = 0;
};

class NeighborHeads {
 public:
  void init(ad::ParameterStore& store, int vocab, int hidden, int l, Rng& rng);
  NeighborDists apply(ad::Tape& t, const EncoderOutput& enc) const;
  int l() const { return static_cast<int>(w_.size()); }

 private:
  std::vector<ad::Parameter*> w_;  // V x H per head
  std::vector<ad::Parameter*> b_;  // V x 1 per head
};

// Uniform mixture of all slices: pi = (1/count) * sum. Throws if there are
// no slices (all positions padded).
ad::Var mix_slices(ad::Tape& t, const NeighborDists& nd);

// -sum_{w in bow} log(pi[w] + eps). Touches only the listed entries, so
// mass moved among other ids leaves the value bit-identical.
ad::Var bow_loss(ad::Tape& t, ad::Var pi, std::span<const int> target_bow,
                 double eps = 1e-10);

// Value-level probabilities for diagnostics: slices[i][j] over vocab.
using NeighborProbs = std::vector<std::vector<Eigen::VectorXd>>;

NeighborProbs neighbor_probs(const ad::Tape& t, const NeighborDists& nd);

// Distinct word ids at which some slice attains its maximum with
// probability above the threshold.
std::set<int> mode_words(const NeighborProbs& probs, double threshold = 0.5);

// Number of such ids.
int count_modes(const NeighborProbs& probs, double threshold = 0.5);

}  // namespace lbow
