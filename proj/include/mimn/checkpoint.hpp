#pragma once

#include <optional>

#include "mimn/data.hpp"
#include "mimn/params.hpp"

namespace mimn {

// Versioned binary checkpoint: hyperparameters, vocabulary and every
// shape-tagged tensor, with a trailing crc64. Round-trips bit-exactly.
struct Checkpoint {
  std::int64_t param_version = 1;
  bool baseline = false;
  std::optional<ModelParams> model;
  std::optional<BaselineParams> baseline_model;
  Vocabulary vocab;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Vocabulary& vocab, std::int64_t param_version = 1);
void save_baseline_checkpoint(const std::string& path, const BaselineParams& params,
                              const Vocabulary& vocab, std::int64_t param_version = 1);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mimn
