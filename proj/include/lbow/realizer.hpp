#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lbow/planner.hpp"
#include "lbow/sampler.hpp"
#include "lbow/vocab.hpp"

namespace lbow {

enum class Variant { seq2seq, seq2seq_attn, lbow_topk, lbow_gumbel, bow_hard, cheating_bow };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);
bool is_bag_variant(Variant v);   // bag-conditioned decoding
bool uses_attention(Variant v);   // everything except plain seq2seq

struct Extensions {
  bool bow_emb = false;
  bool copy = false;
};

// Record of one planning-and-realization pass: predicted neighbors, the
// sampled bag, the decoded tokens with provenance, and attention rows.
struct GenerationTrace {
  std::vector<std::string> source;
  // per source word: l (neighbor, probability) pairs (top of each slot)
  std::vector<std::vector<std::pair<std::string, double>>> neighbors;
  std::vector<std::pair<std::string, double>> bag;
  std::vector<std::string> output;
  std::vector<uint8_t> from_bag;  // 1 iff the emitted token id is in the bag
  std::vector<std::vector<double>> attention;

  std::string to_text() const;
};

class Decoder {
 public:
  void init(ad::ParameterStore& store, int vocab, int emb, int hidden, int layers,
            bool residual, const Extensions& ext, Rng& rng);

  struct BagOnTape {
    std::vector<int> ids;
    ad::Var weights;  // k x 1
  };

  // Per-instance precomputation: decoder initial state, attention memory
  // (source states then projected weighted bag embeddings), cached leaves.
  struct Prepared {
    LstmStack::State state0;
    ad::Var memory;   // H x (m + k)
    ad::Var mem_pre;  // attn_mem * memory
    int src_len = 0;
    std::vector<int> bag_ids;
    ad::Var bag_avg;  // E x 1 weighted-average bag embedding
    bool has_attention = false;
    bool has_bag = false;
    // cached parameter leaves
    ad::Var emb_leaf, attn_state_leaf, attn_v_leaf, mix_w_leaf, mix_b_leaf,
        out_w_leaf, out_b_leaf, gate_w_leaf, gate_b_leaf;
  };

  Prepared prepare(ad::Tape& t, const EncoderOutput& enc,
                   const std::optional<BagOnTape>& bag, Variant variant) const;

  struct TeacherForced {
    ad::Var loss;                     // mean cross-entropy over target steps
    std::vector<ad::Var> log_dists;  // per step, V x 1
  };
  TeacherForced teacher_forced_loss(ad::Tape& t, const Prepared& prep,
                                    std::span<const int> target) const;

  struct GenOptions {
    int max_len = 16;
    int beam_width = 1;  // 1 = greedy
  };
  std::vector<int> generate(ad::Tape& t, const Prepared& prep, const GenOptions& opt,
                            std::vector<std::vector<double>>* attention_out = nullptr) const;

  // The weighted-average bag embedding projected to the decoder state
  // dimension. Bias-free, so it is linear in the bag weights.
  ad::Var init_state_offset(ad::Tape& t, ad::Var bag_avg) const;

  ad::Parameter* embeddings() const { return emb_; }
  const Extensions& extensions() const { return ext_; }
  int hidden() const { return lstm_.hidden(); }

 private:
  struct StepResult {
    ad::Var log_dist;
    ad::Var att;  // invalid without attention
    LstmStack::State state;
  };
  StepResult step(ad::Tape& t, const Prepared& prep, int input_id,
                  const LstmStack::State& prev) const;

  ad::Parameter* emb_ = nullptr;        // E x V
  LstmStack lstm_;
  ad::Parameter* attn_mem_ = nullptr;   // H x H
  ad::Parameter* attn_state_ = nullptr; // H x H
  ad::Parameter* attn_v_ = nullptr;     // H x 1
  ad::Parameter* mix_w_ = nullptr;      // H x 2H
  ad::Parameter* mix_b_ = nullptr;      // H x 1
  ad::Parameter* out_w_ = nullptr;      // V x H
  ad::Parameter* out_b_ = nullptr;      // V x 1
  ad::Parameter* bag_mem_proj_ = nullptr;   // H x E
  ad::Parameter* bag_init_proj_ = nullptr;  // H x E
  ad::Parameter* gate_w_ = nullptr;     // 1 x H
  ad::Parameter* gate_b_ = nullptr;     // 1 x 1
  Extensions ext_;
};

// Concatenate the bag-average embedding to a decoder input (the bow_emb
// extension); identity when disabled.
ad::Var augment_decoder_input(ad::Tape& t, ad::Var x, ad::Var bag_avg, bool enabled);

// gate*softmax(logits) + (1-gate)*bag attention scattered onto bag ids
// (the copy extension). Output sums to 1.
ad::Var copy_output_dist(ad::Tape& t, ad::Var logits, ad::Var bag_att,
                         const std::vector<int>& bag_ids, ad::Var gate);

// Remove then add words. Added ids get the mean surviving weight, or
// 1/original-size if nothing survives. Ids already present are kept once.
SampledBag edit_bag(const SampledBag& bag, std::span<const int> add,
                    std::span<const int> remove, const Vocabulary& vocab);

double total_loss(double l_s2s, double l_bow, double lambda_bow);
ad::Var total_loss(ad::Tape& t, ad::Var l_s2s, ad::Var l_bow, double lambda_bow);

}  // namespace lbow
