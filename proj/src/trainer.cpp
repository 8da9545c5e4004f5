#include "mimn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace mimn {

Adam::Adam(ParamList params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const ParamRef& p : params) {
    if (!p.trainable) continue;
    slots_.push_back({p.name, p.tensor, Tensor(p.tensor->shape()), Tensor(p.tensor->shape())});
  }
}

void Adam::step(const GradientSet& grads, double lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    auto it = grads.find(s.name);
    MIMN_CHECK(it != grads.end(), "adam: missing gradient for " + s.name);
    const Tensor& g = it->second;
    MIMN_CHECK(g.same_shape(*s.target), "adam: gradient shape mismatch for " + s.name);
    Tensor& m = s.m;
    Tensor& v = s.v;
    Tensor& x = *s.target;
    for (int i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      x[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double score_sample(const ModelParams& p, const Sample& s) {
  SequenceResult seq = process_sequence(p, s.history);
  return predict(p, seq.state, s.target_item, s.target_cat);
}

double eval_auc(const ModelParams& p, const std::vector<Sample>& samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(samples.size());
  labels.reserve(samples.size());
  for (const Sample& s : samples) {
    scores.push_back(score_sample(p, s));
    labels.push_back(s.label);
  }
  return auc(scores, labels);
}

double eval_auc_baseline(const BaselineParams& p, const std::vector<Sample>& samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(samples.size());
  labels.reserve(samples.size());
  for (const Sample& s : samples) {
    scores.push_back(baseline_predict(p, s.view()));
    labels.push_back(s.label);
  }
  return auc(scores, labels);
}

double mean_final_usage_variance(const ModelParams& p, const std::vector<Sample>& samples,
                                 size_t cap) {
  size_t n = std::min(cap, samples.size());
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (size_t k = 0; k < n; ++k) {
    SequenceResult seq = process_sequence(p, samples[k].history);
    const Tensor& g = seq.state.usage;
    double mean = 0.0;
    for (int i = 0; i < g.size(); ++i) mean += g[i];
    mean /= g.size();
    double var = 0.0;
    for (int i = 0; i < g.size(); ++i) var += (g[i] - mean) * (g[i] - mean);
    acc += var / g.size();
  }
  return acc / static_cast<double>(n);
}

namespace {

double grad_norm(const GradientSet& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads)
    for (int i = 0; i < g.size(); ++i) s += g[i] * g[i];
  return std::sqrt(s);
}

// Shared epoch loop for both objectives. BuildFn: Sample -> scalar loss with
// gradients accumulated into the set.
template <class Params, class BuildFn>
MetricReport run_epochs(const TrainConfig& cfg, Params& params, const BuildFn& sample_grad,
                        const std::vector<Sample>& train_samples) {
  MetricReport report;
  Adam adam(params.param_list());
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  long decay_interval = cfg.decay_interval;
  if (decay_interval <= 0)
    decay_interval =
        std::max<long>(1, static_cast<long>((train_samples.size() + cfg.batch_size - 1) /
                                            cfg.batch_size));

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    long loss_count = 0;
    double lr = cfg.lr0;
    for (size_t off = 0; off < order.size(); off += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), off + static_cast<size_t>(cfg.batch_size));
      GradientSet grads;
      double batch_loss = 0.0;
      for (size_t k = off; k < end; ++k)
        batch_loss += sample_grad(train_samples[order[k]], grads);
      double inv = 1.0 / static_cast<double>(end - off);
      batch_loss *= inv;
      for (auto& [name, g] : grads)
        for (int i = 0; i < g.size(); ++i) g[i] *= inv;

      lr = decayed_lr(cfg.lr0, cfg.decay_rate, step, decay_interval);
      if (!std::isfinite(batch_loss)) {
        fail("training aborted: non-finite loss at step " + std::to_string(step) +
             " (lr=" + std::to_string(lr) + ", grad_norm=" + std::to_string(grad_norm(grads)) +
             ")");
      }
      adam.step(grads, lr);
      ++step;
      loss_sum += batch_loss * static_cast<double>(end - off);
      loss_count += static_cast<long>(end - off);
    }
    auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.learning_rate = lr;
    rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    report.curve.push_back(rec);
  }
  report.steps = step;
  return report;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& eval_samples, const Vocabulary& vocab) {
  cfg.validate();
  MIMN_CHECK(!train_samples.empty(), "train: empty training set");
  Rng init_rng(cfg.seed);
  TrainResult res{ModelParams::init(cfg.hyper, vocab.item_count(), vocab.category_count(),
                                    init_rng),
                  {}};
  auto sample_grad = [&](const Sample& s, GradientSet& grads) {
    SampleGraph g = build_sample_loss(res.params, s.view());
    g.tape.backward(g.loss);
    g.tape.accumulate_grads(grads);
    return g.tape.value(g.loss)[0];
  };
  res.report = run_epochs(cfg, res.params, sample_grad, train_samples);

  const std::vector<Sample>& eval = eval_samples.empty() ? train_samples : eval_samples;
  res.report.auc = eval_auc(res.params, eval);
  res.report.final_g_variance = mean_final_usage_variance(res.params, eval);
  return res;
}

BaselineResult train_baseline(const TrainConfig& cfg, const std::vector<Sample>& train_samples,
                              const std::vector<Sample>& eval_samples,
                              const Vocabulary& vocab) {
  cfg.validate();
  MIMN_CHECK(!train_samples.empty(), "train: empty training set");
  Rng init_rng(cfg.seed);
  BaselineResult res{BaselineParams::init(cfg.hyper, vocab.item_count(),
                                          vocab.category_count(), init_rng),
                     {}};
  auto sample_grad = [&](const Sample& s, GradientSet& grads) {
    SampleGraph g = build_baseline_loss(res.params, s.view());
    g.tape.backward(g.loss);
    g.tape.accumulate_grads(grads);
    return g.tape.value(g.loss)[0];
  };
  res.report = run_epochs(cfg, res.params, sample_grad, train_samples);

  const std::vector<Sample>& eval = eval_samples.empty() ? train_samples : eval_samples;
  res.report.auc = eval_auc_baseline(res.params, eval);
  return res;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid,
                                      const std::vector<Sample>& train_set,
                                      const std::vector<Sample>& test_set,
                                      const Vocabulary& vocab, int repeats, int parallel) {
  MIMN_CHECK(repeats >= 1, "run_ablation: repeats must be >= 1");
  struct Job {
    size_t cell;
    int repeat;
  };
  std::vector<Job> jobs;
  for (size_t c = 0; c < grid.size(); ++c)
    for (int r = 0; r < repeats; ++r) jobs.push_back({c, r});

  std::vector<double> aucs(jobs.size(), 0.0);
  std::vector<double> gvars(jobs.size(), 0.0);
  std::vector<std::string> errors(jobs.size());

  auto run_job = [&](size_t j) {
    const Job& job = jobs[j];
    TrainConfig cfg = grid[job.cell].config;
    cfg.seed += static_cast<std::uint64_t>(job.repeat);
    try {
      if (grid[job.cell].baseline) {
        BaselineResult r = train_baseline(cfg, train_set, test_set, vocab);
        aucs[j] = r.report.auc;
      } else {
        TrainResult r = train(cfg, train_set, test_set, vocab);
        aucs[j] = r.report.auc;
        gvars[j] = r.report.final_g_variance;
      }
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  };

  int nthreads = std::max(1, parallel);
  if (nthreads == 1) {
    for (size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) run_job(j);
      });
    for (auto& th : pool) th.join();
  }
  for (size_t j = 0; j < jobs.size(); ++j)
    MIMN_CHECK(errors[j].empty(), "ablation cell '" + grid[jobs[j].cell].name +
                                      "' repeat " + std::to_string(jobs[j].repeat) +
                                      " failed: " + errors[j]);

  std::vector<AblationRow> rows;
  for (size_t c = 0; c < grid.size(); ++c) {
    AblationRow row;
    row.name = grid[c].name;
    double mean = 0.0, gv = 0.0;
    for (size_t j = 0; j < jobs.size(); ++j)
      if (jobs[j].cell == c) {
        row.aucs.push_back(aucs[j]);
        mean += aucs[j];
        gv += gvars[j];
      }
    mean /= static_cast<double>(row.aucs.size());
    row.mean_auc = mean;
    row.mean_g_variance = gv / static_cast<double>(row.aucs.size());
    double ss = 0.0;
    for (double a : row.aucs) ss += (a - mean) * (a - mean);
    row.std_auc = row.aucs.size() > 1
                      ? std::sqrt(ss / static_cast<double>(row.aucs.size() - 1))
                      : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mimn
