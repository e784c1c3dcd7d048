#include "lbow/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "lbow/common.hpp"
#include "lbow/data.hpp"
#include "lbow/realizer.hpp"
#include "lbow/sampler.hpp"

namespace lbow {

void RunConfig::validate() const {
  if (schema_version != 1)
    throw UsageError("config: unsupported schema_version " + std::to_string(schema_version));
  Variant v = parse_variant(variant);
  if ((ext_bow_emb || ext_copy) && !is_bag_variant(v))
    throw UsageError("config: extensions need a bag-conditioned variant, got " + variant);
  if (emb < 1 || hidden < 1 || layers < 1) throw UsageError("config: dimensions must be >= 1");
  if (residual && layers > 1 && emb != hidden)
    throw UsageError("config: residual layers need emb == hidden");
  if (l < 1) throw UsageError("config: l must be >= 1");
  if (k < 1) throw UsageError("config: k must be >= 1");
  if (max_len < 2) throw UsageError("config: max_len must be >= 2");
  if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
  if (epochs < 0) throw UsageError("config: epochs must be >= 0");
  if (learning_rate <= 0) throw UsageError("config: learning_rate must be positive");
  parse_weighting(weighting);
  if (sampling != "auto") parse_sample_mode(sampling);
  parse_format(format);
}

std::string RunConfig::to_json_text() const {
  nlohmann::json j{
      {"schema_version", schema_version},
      {"variant", variant},
      {"ext_bow_emb", ext_bow_emb},
      {"ext_copy", ext_copy},
      {"emb", emb},
      {"hidden", hidden},
      {"layers", layers},
      {"residual", residual},
      {"l", l},
      {"k", k},
      {"lambda_bow", lambda_bow},
      {"learning_rate", learning_rate},
      {"grad_clip", grad_clip},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"max_len", max_len},
      {"seed", seed},
      {"weighting", weighting},
      {"sampling", sampling},
      {"data_path", data_path},
      {"dev_path", dev_path},
      {"vocab_path", vocab_path},
      {"format", format},
      {"checkpoint_path", checkpoint_path},
      {"report_path", report_path},
      {"log_path", log_path},
  };
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: bad JSON: ") + e.what());
  }
  RunConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("schema_version", c.schema_version);
  get("variant", c.variant);
  get("ext_bow_emb", c.ext_bow_emb);
  get("ext_copy", c.ext_copy);
  get("emb", c.emb);
  get("hidden", c.hidden);
  get("layers", c.layers);
  get("residual", c.residual);
  get("l", c.l);
  get("k", c.k);
  get("lambda_bow", c.lambda_bow);
  get("learning_rate", c.learning_rate);
  get("grad_clip", c.grad_clip);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("max_len", c.max_len);
  get("seed", c.seed);
  get("weighting", c.weighting);
  get("sampling", c.sampling);
  get("data_path", c.data_path);
  get("dev_path", c.dev_path);
  get("vocab_path", c.vocab_path);
  get("format", c.format);
  get("checkpoint_path", c.checkpoint_path);
  get("report_path", c.report_path);
  get("log_path", c.log_path);
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("config: cannot write " + path.string());
  out << to_json_text();
}

}  // namespace lbow
