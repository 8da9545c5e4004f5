#pragma once

#include "mimn/auc.hpp"
#include "mimn/data.hpp"
#include "mimn/model_tape.hpp"

namespace mimn {

struct TrainConfig {
  double lr0 = 0.001;
  double decay_rate = 0.9;
  long decay_interval = 0;  // optimizer steps between decays; 0 = one epoch
  int batch_size = 128;
  int epochs = 2;
  std::uint64_t seed = 1;
  HyperParams hyper;

  void validate() const {
    MIMN_CHECK(lr0 > 0.0, "lr0 must be positive");
    MIMN_CHECK(decay_rate > 0.0 && decay_rate <= 1.0, "decay_rate must be in (0,1]");
    MIMN_CHECK(batch_size > 0, "batch_size must be positive");
    MIMN_CHECK(epochs >= 0, "epochs must be nonnegative");
    hyper.validate();
  }
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct MetricReport {
  double auc = 0.0;  // on the eval set (train set when no eval given)
  std::vector<EpochRecord> curve;
  double final_g_variance = 0.0;  // mean over eval sequences of var(usage)
  long steps = 0;
};

// lr0 * decay_rate^n after n whole decay intervals.
inline double decayed_lr(double lr0, double decay_rate, long step, long decay_interval) {
  long n = decay_interval > 0 ? step / decay_interval : 0;
  return lr0 * std::pow(decay_rate, static_cast<double>(n));
}

// Adam over an enumerated parameter list; non-trainable entries are skipped.
class Adam {
 public:
  explicit Adam(ParamList params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(const GradientSet& grads, double lr);
  long steps_taken() const { return t_; }

 private:
  struct Slot {
    std::string name;
    Tensor* target;
    Tensor m, v;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

struct TrainResult {
  ModelParams params;
  MetricReport report;
};

struct BaselineResult {
  BaselineParams params;
  MetricReport report;
};

// Mini-batch Adam on the full objective. Deterministic under config.seed
// (fixed shuffle, fixed batch accumulation order). Aborts with a diagnostic
// on non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& eval_samples, const Vocabulary& vocab);

BaselineResult train_baseline(const TrainConfig& cfg, const std::vector<Sample>& train_samples,
                              const std::vector<Sample>& eval_samples, const Vocabulary& vocab);

// Plain-route scoring used for evaluation and serving parity tests.
double score_sample(const ModelParams& p, const Sample& s);
double eval_auc(const ModelParams& p, const std::vector<Sample>& samples);
double eval_auc_baseline(const BaselineParams& p, const std::vector<Sample>& samples);

// Mean over samples of the variance across slots of the final usage vector.
double mean_final_usage_variance(const ModelParams& p, const std::vector<Sample>& samples,
                                 size_t cap = 256);

struct AblationCell {
  std::string name;
  TrainConfig config;
  bool baseline = false;
};

struct AblationRow {
  std::string name;
  std::vector<double> aucs;  // one per repeat
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample standard deviation
  double mean_g_variance = 0.0;
};

// Each cell runs `repeats` times with seeds config.seed, +1, +2, ...;
// rows report mean +/- sample std. Cells x repeats run on `parallel`
// threads; aggregation order is fixed by the grid, so output is
// deterministic regardless of scheduling.
std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid,
                                      const std::vector<Sample>& train_set,
                                      const std::vector<Sample>& test_set,
                                      const Vocabulary& vocab, int repeats = 3,
                                      int parallel = 1);

}  // namespace mimn
