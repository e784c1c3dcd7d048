#include "lbow/model.hpp"

#include <stdexcept>

#include "lbow/common.hpp"

namespace lbow {

namespace {

SampleMode resolve_sampling(const RunConfig& cfg, Variant v) {
  if (cfg.sampling != "auto") return parse_sample_mode(cfg.sampling);
  return v == Variant::lbow_gumbel ? SampleMode::gumbel : SampleMode::deterministic;
}

}  // namespace

LatentBowModel::LatentBowModel(const RunConfig& cfg, int vocab_size, Rng& init_rng)
    : cfg_(cfg), vocab_size_(vocab_size) {
  cfg_.validate();
  variant_ = parse_variant(cfg.variant);
  weighting_ = parse_weighting(cfg.weighting);
  encoder_.init(params_, vocab_size, cfg.emb, cfg.hidden, cfg.layers, cfg.residual, init_rng);
  if (is_bag_variant(variant_))
    heads_.init(params_, vocab_size, cfg.hidden, cfg.l, init_rng);
  Extensions ext{cfg.ext_bow_emb, cfg.ext_copy};
  decoder_.init(params_, vocab_size, cfg.emb, cfg.hidden, cfg.layers, cfg.residual, ext,
                init_rng);
}

LatentBowModel::Plan LatentBowModel::plan(ad::Tape& t, const EncoderOutput& enc,
                                          std::span<const int> target_bow, SampleMode sampling,
                                          Rng* noise_rng, const SampledBag* bag_override) const {
  Plan p;
  p.nd = heads_.apply(t, enc);
  p.pi = mix_slices(t, p.nd);

  if (bag_override) {
    p.bag = *bag_override;
    p.bag_on_tape = Decoder::BagOnTape{p.bag.ids, t.constant(p.bag.weights)};
    return p;
  }
  if (variant_ == Variant::cheating_bow) {
    if (target_bow.empty())
      throw std::invalid_argument("cheating_bow: needs the target bag at decode time");
    p.bag.ids.assign(target_bow.begin(), target_bow.end());
    p.bag.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(target_bow.size()));
    p.bag.mode = SampleMode::deterministic;
    p.bag_on_tape = Decoder::BagOnTape{p.bag.ids, t.constant(p.bag.weights)};
    return p;
  }

  const Eigen::VectorXd pi_values = t.val(p.pi).col(0);
  Eigen::VectorXd noise = Eigen::VectorXd::Zero(pi_values.size());
  if (sampling == SampleMode::gumbel) {
    if (!noise_rng) throw std::invalid_argument("gumbel sampling needs a noise rng");
    noise = gumbel_noise(static_cast<int>(pi_values.size()), *noise_rng);
    p.bag = sample_bag_with_noise(pi_values, cfg_.k, noise, weighting_);
  } else {
    p.bag = sample_bag(pi_values, cfg_.k, SampleMode::deterministic, weighting_, nullptr);
  }
  ad::Var w = straight_through_weights(t, p.pi, p.bag.ids, noise, weighting_);
  p.bag_on_tape = Decoder::BagOnTape{p.bag.ids, w};
  return p;
}

LatentBowModel::Losses LatentBowModel::instance_loss(ad::Tape& t, std::span<const int> source,
                                                     std::span<const uint8_t> source_mask,
                                                     std::span<const int> target,
                                                     std::span<const int> target_bow,
                                                     Rng* noise_rng) const {
  EncoderOutput enc = source_mask.empty() ? encoder_.encode(t, source)
                                          : encoder_.encode(t, source, source_mask);
  Losses out;
  if (!is_bag_variant(variant_)) {
    Decoder::Prepared prep = decoder_.prepare(t, enc, std::nullopt, variant_);
    out.s2s = decoder_.teacher_forced_loss(t, prep, target).loss;
    out.total = out.s2s;
    return out;
  }

  Plan p = plan(t, enc, target_bow, resolve_sampling(cfg_, variant_), noise_rng, nullptr);
  out.bow = bow_loss(t, p.pi, target_bow);
  Decoder::Prepared prep = decoder_.prepare(t, enc, p.bag_on_tape, variant_);
  out.s2s = decoder_.teacher_forced_loss(t, prep, target).loss;
  out.total = total_loss(t, out.s2s, out.bow, cfg_.lambda_bow);
  return out;
}

LatentBowModel::GenOutput LatentBowModel::generate(const GenRequest& req) const {
  ad::Tape t;
  EncoderOutput enc = encoder_.encode(t, req.source);
  GenOutput out;

  std::optional<Decoder::BagOnTape> bag_on_tape;
  if (is_bag_variant(variant_)) {
    NeighborDists nd = heads_.apply(t, enc);
    ad::Var pi = mix_slices(t, nd);
    out.probs = neighbor_probs(t, nd);
    if (req.bag_override) {
      out.bag = *req.bag_override;
    } else if (variant_ == Variant::cheating_bow) {
      throw std::invalid_argument("cheating_bow generation needs a bag_override");
    } else {
      const Eigen::VectorXd pi_values = t.val(pi).col(0);
      out.bag = sample_bag(pi_values, cfg_.k, req.sampling, weighting_, req.noise_rng);
    }
    bag_on_tape = Decoder::BagOnTape{out.bag.ids, t.constant(out.bag.weights)};
  }

  Decoder::Prepared prep = decoder_.prepare(t, enc, bag_on_tape, variant_);
  Decoder::GenOptions opt;
  opt.max_len = req.max_len;
  opt.beam_width = req.beam_width;
  out.tokens = decoder_.generate(t, prep, opt, &out.attention);
  return out;
}

}  // namespace lbow
