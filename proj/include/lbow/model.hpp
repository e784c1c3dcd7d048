#pragma once

#include <optional>
#include <span>

#include "lbow/config.hpp"
#include "lbow/planner.hpp"
#include "lbow/realizer.hpp"
#include "lbow/sampler.hpp"

namespace lbow {

// Encoder + neighbor heads + bag sampling + decoder, wired per variant.
class LatentBowModel {
 public:
  LatentBowModel(const RunConfig& cfg, int vocab_size, Rng& init_rng);

  struct Losses {
    ad::Var total;
    ad::Var s2s;
    ad::Var bow;  // invalid for variants without the planner loss
  };

  // Teacher-forced losses for one instance. target must end with EOS and
  // carry no pads. noise_rng is consumed only by gumbel sampling.
  Losses instance_loss(ad::Tape& t, std::span<const int> source,
                       std::span<const uint8_t> source_mask, std::span<const int> target,
                       std::span<const int> target_bow, Rng* noise_rng) const;

  struct GenRequest {
    std::span<const int> source;
    int max_len = 16;
    int beam_width = 1;
    SampleMode sampling = SampleMode::deterministic;
    Rng* noise_rng = nullptr;
    const SampledBag* bag_override = nullptr;  // cheating bag or an edited bag
  };

  struct GenOutput {
    std::vector<int> tokens;
    SampledBag bag;       // the bag actually fed to the decoder (empty ids if none)
    NeighborProbs probs;  // planner slices (empty for seq2seq variants)
    std::vector<std::vector<double>> attention;
  };

  GenOutput generate(const GenRequest& req) const;

  const RunConfig& cfg() const { return cfg_; }
  int vocab_size() const { return vocab_size_; }
  Variant variant() const { return variant_; }
  ad::ParameterStore& params() { return params_; }
  const ad::ParameterStore& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const NeighborHeads& heads() const { return heads_; }
  const Decoder& decoder() const { return decoder_; }

  // True when the planner (neighbor heads) exists for this variant.
  bool has_planner() const { return is_bag_variant(variant_); }

 private:
  struct Plan {
    ad::Var pi;
    NeighborDists nd;
    SampledBag bag;
    std::optional<Decoder::BagOnTape> bag_on_tape;
  };
  Plan plan(ad::Tape& t, const EncoderOutput& enc, std::span<const int> target_bow,
            SampleMode sampling, Rng* noise_rng, const SampledBag* bag_override) const;

  RunConfig cfg_;
  int vocab_size_ = 0;
  Variant variant_;
  Weighting weighting_;
  ad::ParameterStore params_;
  Encoder encoder_;
  NeighborHeads heads_;
  Decoder decoder_;
};

}  // namespace lbow
