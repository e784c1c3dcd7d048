#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace lbow {

// Everything a run needs, serializable as JSON with a schema_version
// field. Flags on the CLI mirror these fields and override file values.
struct RunConfig {
  int schema_version = 1;

  std::string variant = "lbow_topk";
  bool ext_bow_emb = false;
  bool ext_copy = false;

  int emb = 32;
  int hidden = 64;
  int layers = 1;
  bool residual = false;  // layer-2 input = layer-1 input + output

  int l = 3;   // neighbors per source word
  int k = 10;  // bag size

  double lambda_bow = 1.0;
  double learning_rate = 1e-3;
  double grad_clip = 5.0;
  int batch_size = 32;
  int epochs = 10;
  int max_len = 16;
  uint64_t seed = 1;

  std::string weighting = "perturbed";  // base | perturbed
  std::string sampling = "auto";        // auto | gumbel | deterministic

  std::string data_path;
  std::string dev_path;
  std::string vocab_path;
  std::string format = "quora";
  std::string checkpoint_path;
  std::string report_path;
  std::string log_path;

  void validate() const;

  std::string to_json_text() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const RunConfig&) const = default;
};

}  // namespace lbow
