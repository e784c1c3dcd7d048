#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>

#include "lbow/data.hpp"
#include "lbow/metrics.hpp"
#include "lbow/model.hpp"

namespace lbow {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 5.0;  // global gradient-norm clip
};

// One optimizer step over all accumulated gradients; zeroes them after.
// t is the 1-based step counter used for bias correction.
void adam_step(ad::ParameterStore& params, const AdamConfig& cfg, uint64_t t);

// A trainable model together with everything needed to reproduce its
// trajectory: optimizer state, epoch counter, and the RNG streams.
// Checkpoints round-trip all of it, so resuming matches an uninterrupted
// run to full precision.
class Session {
 public:
  Session(const RunConfig& cfg, int vocab_size);

  void save_checkpoint(const std::filesystem::path& path) const;
  static std::unique_ptr<Session> load_checkpoint(const std::filesystem::path& path);

  LatentBowModel& model() { return *model_; }
  const LatentBowModel& model() const { return *model_; }
  const RunConfig& cfg() const { return cfg_; }

  int epoch = 0;
  uint64_t adam_t = 0;
  Rng data_rng;
  Rng noise_rng;

 private:
  Session() = default;
  RunConfig cfg_;
  int vocab_size_ = 0;
  std::unique_ptr<LatentBowModel> model_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double train_s2s = 0;
  double train_bow = 0;
  bool has_dev = false;
  MetricsReport dev;

  std::string to_json() const;
  static EpochLog from_json(const std::string& text);
};

struct TrainResult {
  std::vector<EpochLog> logs;
};

// Runs cfg.epochs - session.epoch further epochs. After each epoch the
// checkpoint (if a path is configured) and a JSONL log line are written.
// Non-finite loss raises DivergenceError; the last finished epoch's
// checkpoint stays on disk.
TrainResult train(Session& session, const std::vector<Instance>& train_set,
                  const std::vector<Instance>* dev_set, const Vocabulary& vocab,
                  std::ostream* progress = nullptr);

// Greedy decoding over the test set plus planner diagnostics. The bag is
// chosen deterministically; cheating_bow substitutes each instance's
// target bag.
MetricsReport evaluate(const LatentBowModel& model, const std::vector<Instance>& test_set,
                       const Vocabulary& vocab, int beam_width = 1);

struct NeighborRow {
  std::string word;
  int slot = 0;
  std::string neighbor;
  double prob = 0;
};

struct NeighborTable {
  std::vector<NeighborRow> rows;
  std::vector<std::string> oov;  // words outside the vocabulary
  std::string to_tsv() const;
};

// Runs each word as a single-token source and reports the top_n entries
// of every neighbor slot.
NeighborTable dump_neighbors(const LatentBowModel& model, const std::vector<std::string>& words,
                             const Vocabulary& vocab, int top_n);

struct TraceOptions {
  SampleMode sampling = SampleMode::deterministic;
  Rng* noise_rng = nullptr;
  int beam_width = 1;
  const SampledBag* bag_override = nullptr;
};

GenerationTrace trace(const LatentBowModel& model, const std::vector<std::string>& sentence,
                      const Vocabulary& vocab, const TraceOptions& opt = {});

// Trace, edit the bag, regenerate; returns before and after for diffing.
std::pair<GenerationTrace, GenerationTrace> edit_and_generate(
    const LatentBowModel& model, const std::vector<std::string>& sentence,
    const std::vector<std::string>& add, const std::vector<std::string>& remove,
    const Vocabulary& vocab);

}  // namespace lbow
