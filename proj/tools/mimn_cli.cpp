// Operator entry point: ingest, train, eval, ablate, gradcheck, warmup,
// serve-sim, bench, snapshot and rollback subcommands over one declarative
// key=value config (flags override file values; the effective config is
// echoed into the output directory).
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mimn/bench.hpp"
#include "mimn/checkpoint.hpp"
#include "mimn/config.hpp"
#include "mimn/loss_eval.hpp"
#include "mimn/synthetic.hpp"
#include "mimn/trainer.hpp"
#include "mimn/uic_store.hpp"

namespace fs = std::filesystem;
using namespace mimn;

namespace {

// ---------------------------------------------------------------------------
// config plumbing

struct App {
  Config cfg;
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value

  void load() {
    if (!config_path.empty()) cfg = Config::parse_file(config_path);
    for (const std::string& kv : overrides) {
      size_t eq = kv.find('=');
      MIMN_CHECK(eq != std::string::npos, "--set expects section.key=value, got: " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
};

void add_common(CLI::App* cmd, App& app) {
  cmd->add_option("--config", app.config_path, "declarative key=value config file");
  cmd->add_option("--set", app.overrides, "override: section.key=value")->take_all();
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

HyperParams hyper_from(const Config& cfg) {
  HyperParams h;
  h.slots = cfg.get_int("hyper.slots", h.slots);
  h.width = cfg.get_int("hyper.width", h.width);
  h.miu_width = cfg.get_int("hyper.miu_width", h.miu_width);
  h.k_top = cfg.get_int("hyper.k_top", h.k_top);
  h.lambda = cfg.get_double("hyper.lambda", h.lambda);
  h.profile_dim = cfg.get_int("hyper.profile_dim", h.profile_dim);
  // Random slot init is the training default; all-zero slots never
  // differentiate (every write lands uniformly forever).
  h.init_scale = cfg.get_double("hyper.init_scale", 0.1);
  h.use_mur = cfg.get_bool("hyper.mur", h.use_mur);
  h.use_miu = cfg.get_bool("hyper.miu", h.use_miu);
  if (cfg.has("hyper.mlp")) h.mlp_widths = parse_int_list(cfg.get_str("hyper.mlp", ""));
  h.validate();
  return h;
}

void echo_hyper(Config& cfg, const HyperParams& h) {
  cfg.set("hyper.slots", std::to_string(h.slots));
  cfg.set("hyper.width", std::to_string(h.width));
  cfg.set("hyper.miu_width", std::to_string(h.miu_width));
  cfg.set("hyper.k_top", std::to_string(h.k_top));
  cfg.set("hyper.lambda", std::to_string(h.lambda));
  cfg.set("hyper.profile_dim", std::to_string(h.profile_dim));
  cfg.set("hyper.init_scale", std::to_string(h.init_scale));
  cfg.set("hyper.mur", h.use_mur ? "true" : "false");
  cfg.set("hyper.miu", h.use_miu ? "true" : "false");
  cfg.set("hyper.mlp", join_ints(h.mlp_widths));
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig t;
  t.lr0 = cfg.get_double("train.lr0", t.lr0);
  t.decay_rate = cfg.get_double("train.decay_rate", t.decay_rate);
  t.decay_interval = cfg.get_long("train.decay_interval", t.decay_interval);
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.seed = static_cast<std::uint64_t>(cfg.get_long("train.seed", 1));
  t.hyper = hyper_from(cfg);
  t.validate();
  return t;
}

void echo_train(Config& cfg, const TrainConfig& t) {
  cfg.set("train.lr0", std::to_string(t.lr0));
  cfg.set("train.decay_rate", std::to_string(t.decay_rate));
  cfg.set("train.decay_interval", std::to_string(t.decay_interval));
  cfg.set("train.batch_size", std::to_string(t.batch_size));
  cfg.set("train.epochs", std::to_string(t.epochs));
  cfg.set("train.seed", std::to_string(t.seed));
  echo_hyper(cfg, t.hyper);
}

std::string out_dir(const Config& cfg, const std::string& fallback) {
  std::string dir = cfg.get_str("out.dir", fallback);
  fs::create_directories(dir);
  return dir;
}

void write_echo(const Config& cfg, const std::string& dir) {
  cfg.write_file((fs::path(dir) / "config.echo.conf").string());
}

std::vector<BehaviorEvent> read_event_file(const Config& cfg, const std::string& path) {
  LogFormat fmt = cfg.get_str("data.format", "taobao") == "amazon" ? LogFormat::kAmazon
                                                                   : LogFormat::kTaobao;
  IngestStats stats;
  auto events = read_events(path, fmt, cfg.get_str("data.meta", ""), &stats);
  std::cerr << "events: " << events.size() << " read, " << stats.rows_skipped
            << " rows skipped\n";
  return events;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_ingest(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string input = cfg.get_str("data.input", "");
  MIMN_CHECK(!input.empty(), "data.input is required (behavior log path)");
  MIMN_CHECK(fs::exists(input), "input file does not exist: " + input);

  IngestOptions opts;
  opts.format = cfg.get_str("data.format", "taobao") == "amazon" ? LogFormat::kAmazon
                                                                  : LogFormat::kTaobao;
  opts.min_len = cfg.get_int("data.min_len", 20);
  opts.max_len = cfg.get_int("data.max_len", 100);
  opts.meta_path = cfg.get_str("data.meta", "");
  Dataset ds = ingest(input, opts);

  std::vector<Sample> samples = ds.samples;
  if (cfg.get_bool("data.negatives", true))
    samples = negative_sample(ds.samples, ds.vocab,
                              static_cast<std::uint64_t>(cfg.get_long("data.neg_seed", 1)));

  std::string dir = out_dir(cfg, "ingest_out");
  std::string sample_path = (fs::path(dir) / "samples.txt").string();
  save_samples(sample_path, samples, ds.vocab);
  write_echo(cfg, dir);

  std::cout << "rows_read=" << ds.stats.rows_read << " rows_skipped=" << ds.stats.rows_skipped
            << " users_seen=" << ds.stats.users_seen
            << " users_dropped=" << ds.stats.users_dropped << "\n"
            << "samples=" << samples.size() << " items=" << ds.vocab.item_count() - 1
            << " categories=" << ds.vocab.category_count() - 1 << "\n"
            << "sample_file=" << sample_path << "\n";
  return 0;
}

int cmd_train(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string sample_path = cfg.get_str("data.samples", "");
  MIMN_CHECK(!sample_path.empty(), "data.samples is required (sample file from ingest)");
  auto [samples, vocab] = load_samples(sample_path);

  TrainConfig tc = train_config_from(cfg);
  double test_fraction = cfg.get_double("train.test_fraction", 0.2);
  auto split_seed = static_cast<std::uint64_t>(cfg.get_long("train.split_seed", 0));
  auto [train_set, test_set] = split(samples, SplitPolicy{test_fraction, split_seed});
  std::string model_kind = cfg.get_str("train.model", "mimn");

  std::string dir = out_dir(cfg, "train_out");
  echo_train(cfg, tc);
  cfg.set("train.model", model_kind);
  cfg.set("train.test_fraction", std::to_string(test_fraction));
  cfg.set("train.split_seed", std::to_string(split_seed));
  write_echo(cfg, dir);

  MetricReport report;
  std::string ckpt = (fs::path(dir) / "model.ckpt").string();
  if (model_kind == "baseline") {
    BaselineResult r = train_baseline(tc, train_set, test_set, vocab);
    report = r.report;
    save_baseline_checkpoint(ckpt, r.params, vocab);
  } else {
    MIMN_CHECK(model_kind == "mimn", "train.model must be mimn or baseline");
    TrainResult r = train(tc, train_set, test_set, vocab);
    report = r.report;
    save_checkpoint(ckpt, r.params, vocab);
  }

  std::ofstream metrics((fs::path(dir) / "metrics.txt").string());
  for (const EpochRecord& e : report.curve)
    metrics << "epoch=" << e.epoch << " loss=" << e.mean_loss << " lr=" << e.learning_rate
            << " seconds=" << e.seconds << "\n";
  metrics << "final auc=" << report.auc << " g_variance=" << report.final_g_variance
          << " steps=" << report.steps << "\n";

  std::cout << "train_samples=" << train_set.size() << " test_samples=" << test_set.size()
            << "\nauc=" << report.auc << "\ncheckpoint=" << ckpt << "\n";
  return 0;
}

int cmd_eval(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string sample_path = cfg.get_str("data.samples", "");
  std::string ckpt_path = cfg.get_str("eval.checkpoint", "");
  MIMN_CHECK(!sample_path.empty() && !ckpt_path.empty(),
             "data.samples and eval.checkpoint are required");
  auto [samples, vocab] = load_samples(sample_path);
  Checkpoint ck = load_checkpoint(ckpt_path);
  MIMN_CHECK(ck.vocab == vocab, "checkpoint vocabulary differs from the sample file");
  double value = ck.baseline ? eval_auc_baseline(*ck.baseline_model, samples)
                             : eval_auc(*ck.model, samples);
  std::cout << "samples=" << samples.size() << " auc=" << value << "\n";
  return 0;
}

int cmd_ablate(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string sample_path = cfg.get_str("data.samples", "");
  MIMN_CHECK(!sample_path.empty(), "data.samples is required");
  auto [samples, vocab] = load_samples(sample_path);
  auto [train_set, test_set] =
      split(samples, SplitPolicy{cfg.get_double("train.test_fraction", 0.2),
                                 static_cast<std::uint64_t>(cfg.get_long("train.split_seed", 0))});

  TrainConfig base = train_config_from(cfg);
  std::string cells = cfg.get_str("ablate.cells", "baseline,base,mur,full");
  int repeats = cfg.get_int("ablate.repeats", 3);
  int parallel = cfg.get_int("ablate.parallel", 2);

  std::vector<AblationCell> grid;
  std::stringstream ss(cells);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    TrainConfig tc = base;
    if (cell == "baseline") {
      grid.push_back({"embedding_mlp", tc, true});
    } else if (cell == "base") {
      tc.hyper.use_mur = false;
      tc.hyper.use_miu = false;
      grid.push_back({"mimn_base", tc, false});
    } else if (cell == "mur") {
      tc.hyper.use_miu = false;
      grid.push_back({"mimn_mur", tc, false});
    } else if (cell == "full") {
      grid.push_back({"mimn_mur_miu", tc, false});
    } else if (cell.rfind("slots", 0) == 0) {
      tc.hyper.slots = std::stoi(cell.substr(5));
      tc.hyper.k_top = std::min(tc.hyper.k_top, tc.hyper.slots);
      tc.hyper.use_mur = false;
      tc.hyper.use_miu = false;
      grid.push_back({"mimn_" + cell, tc, false});
    } else {
      fail("unknown ablation cell: " + cell + " (use baseline,base,mur,full,slots<N>)");
    }
  }
  MIMN_CHECK(!grid.empty(), "ablate.cells selected no cells");

  std::string dir = out_dir(cfg, "ablate_out");
  echo_train(cfg, base);
  cfg.set("ablate.cells", cells);
  cfg.set("ablate.repeats", std::to_string(repeats));
  cfg.set("ablate.parallel", std::to_string(parallel));
  write_echo(cfg, dir);

  auto rows = run_ablation(grid, train_set, test_set, vocab, repeats, parallel);

  std::ostringstream table;
  table << "cell\truns\tauc_mean\tauc_std\tg_variance\n";
  for (const AblationRow& r : rows) {
    table << r.name << "\t" << r.aucs.size() << "\t" << r.mean_auc << "\t" << r.std_auc
          << "\t" << r.mean_g_variance << "\n";
  }
  std::ofstream(fs::path(dir) / "ablation.tsv") << table.str();
  std::cout << table.str();
  return 0;
}

int cmd_gradcheck(App& app) {
  app.load();
  Config& cfg = app.cfg;
  HyperParams h = hyper_from(cfg);
  int batch = cfg.get_int("gradcheck.batch", 4);
  int seq_len = cfg.get_int("gradcheck.seq_len", 10);
  double step = cfg.get_double("gradcheck.step", 1e-6);
  double tol = cfg.get_double("gradcheck.tol", 1e-4);
  int threads = cfg.get_int("gradcheck.threads", 2);
  auto seed = static_cast<std::uint64_t>(cfg.get_long("gradcheck.seed", 5));

  int n_items = cfg.get_int("gradcheck.items", 20);
  int n_cats = cfg.get_int("gradcheck.categories", 8);
  Rng prng(seed);
  ModelParams params = ModelParams::init(h, n_items, n_cats, prng);
  Rng rng(seed ^ 0x5555);
  std::vector<Sample> samples;
  for (int k = 0; k < batch; ++k) {
    Sample s;
    s.user_id = "u" + std::to_string(k);
    for (int t = 0; t < seq_len; ++t)
      s.history.emplace_back(
          1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_items - 1)),
          1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_cats - 1)));
    s.target_item = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_items - 1));
    s.target_cat = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_cats - 1));
    s.label = k % 2;
    samples.push_back(std::move(s));
  }

  // Test hook: deliberately corrupt one analytic gradient so the check's
  // failure path can be exercised end to end.
  const char* inject = std::getenv("MIMN_GRADCHECK_NEGATE");
  std::string bug = inject ? inject : "";
  if (!bug.empty()) std::cerr << "note: negating analytic gradient of " << bug << "\n";

  MimnBatchLoss numeric(params, samples);
  GradCheckReport rep = check_gradients<ModelParams>(
      params,
      [&](const ModelParams& p) {
        GradientSet g = mimn_batch_grads(p, samples);
        if (!bug.empty()) {
          auto it = g.find(bug);
          MIMN_CHECK(it != g.end(), "MIMN_GRADCHECK_NEGATE: unknown parameter " + bug);
          for (int i = 0; i < it->second.size(); ++i) it->second[i] = -it->second[i];
        }
        return g;
      },
      [&](const ModelParams& p, const std::string& name) { return numeric(p, name); }, step,
      threads);

  std::cout << "params_checked=" << rep.params_checked << " max_rel_err=" << rep.max_rel_err
            << " worst=" << rep.worst_param << "[" << rep.worst_index << "]"
            << " analytic=" << rep.analytic << " numeric=" << rep.numeric << "\n";
  if (rep.max_rel_err >= tol) {
    std::cerr << "gradient check FAILED (tolerance " << tol << ")\n";
    return 1;
  }
  std::cout << "gradient check passed (tolerance " << tol << ")\n";
  return 0;
}

// Request file: user_id<TAB>item:cat[ item:cat ...]
std::vector<bench::ScoreRequest> read_request_file(const std::string& path) {
  std::ifstream in(path);
  MIMN_CHECK(in.good(), "cannot open request file: " + path);
  std::vector<bench::ScoreRequest> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    MIMN_CHECK(tab != std::string::npos, "request line missing tab: " + line);
    bench::ScoreRequest req;
    req.user_id = line.substr(0, tab);
    std::stringstream ss(line.substr(tab + 1));
    std::string tok;
    while (ss >> tok) {
      size_t colon = tok.find(':');
      MIMN_CHECK(colon != std::string::npos, "candidate must be item:category, got " + tok);
      req.candidates.emplace_back(tok.substr(0, colon), tok.substr(colon + 1));
    }
    MIMN_CHECK(!req.candidates.empty(), "request has no candidates: " + line);
    out.push_back(std::move(req));
  }
  return out;
}

int cmd_serve_sim(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string ckpt_path = cfg.get_str("serve.checkpoint", "");
  std::string event_path = cfg.get_str("serve.events", "");
  std::string request_path = cfg.get_str("serve.requests", "");
  MIMN_CHECK(!ckpt_path.empty() && !event_path.empty() && !request_path.empty(),
             "serve.checkpoint, serve.events and serve.requests are required");
  std::string mode = cfg.get_str("serve.mode", "uic");
  MIMN_CHECK(mode == "uic" || mode == "recompute", "serve.mode must be uic or recompute");

  Checkpoint ck = load_checkpoint(ckpt_path);
  MIMN_CHECK(!ck.baseline, "serve-sim needs a memory-model checkpoint");
  auto params = std::make_shared<ModelParams>(std::move(*ck.model));
  auto vocab = std::make_shared<Vocabulary>(std::move(ck.vocab));

  std::string dir = out_dir(cfg, "serve_out");
  write_echo(cfg, dir);

  std::vector<BehaviorEvent> events = read_event_file(cfg, event_path);
  std::vector<bench::ScoreRequest> requests = read_request_file(request_path);

  uic::StateStore store({params, vocab, ck.param_version},
                        (fs::path(dir) / "snapshots").string(),
                        cfg.get_int("snapshot.retain", 7));
  for (const BehaviorEvent& e : events) store.apply_event(e);

  std::unordered_map<std::string, std::vector<BehaviorEvent>> histories;
  if (mode == "recompute")
    for (const BehaviorEvent& e : events) histories[e.user_id].push_back(e);

  std::ofstream scores_out((fs::path(dir) / "scores.txt").string());
  std::vector<double> lat_ms;
  lat_ms.reserve(requests.size());
  for (const bench::ScoreRequest& req : requests) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> scores =
        mode == "uic" ? bench::handle_request(req, store, *params, *vocab)
                      : bench::handle_request_recompute(req, histories[req.user_id], *params,
                                                        *vocab);
    auto t1 = std::chrono::steady_clock::now();
    lat_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    scores_out << req.user_id;
    for (size_t c = 0; c < scores.size(); ++c)
      scores_out << "\t" << req.candidates[c].first << ":" << req.candidates[c].second << "="
                 << scores[c];
    scores_out << "\n";
  }

  std::sort(lat_ms.begin(), lat_ms.end());
  auto pct = [&](double q) {
    if (lat_ms.empty()) return 0.0;
    size_t idx = static_cast<size_t>(std::ceil(q * static_cast<double>(lat_ms.size())));
    idx = std::min(lat_ms.size() - 1, std::max<size_t>(1, idx) - 1);
    return lat_ms[idx];
  };
  std::cout << "users=" << store.user_count() << " events=" << events.size()
            << " requests=" << requests.size() << " mode=" << mode << "\n"
            << "p50_ms=" << pct(0.5) << " p90_ms=" << pct(0.9) << " p99_ms=" << pct(0.99)
            << "\nscores=" << (fs::path(dir) / "scores.txt").string() << "\n";

  if (cfg.get_bool("serve.snapshot_at_end", false)) {
    auto snap = store.snapshot();
    std::cout << "snapshot=" << snap.path << " users=" << snap.user_count
              << " checksum=" << snap.checksum << "\n";
  }
  return 0;
}

int cmd_warmup(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string ckpt_path = cfg.get_str("serve.checkpoint", "");
  std::string event_path = cfg.get_str("serve.events", "");
  MIMN_CHECK(!ckpt_path.empty() && !event_path.empty(),
             "serve.checkpoint and serve.events are required");
  Checkpoint ck = load_checkpoint(ckpt_path);
  MIMN_CHECK(!ck.baseline, "warmup needs a memory-model checkpoint");
  auto params = std::make_shared<ModelParams>(std::move(*ck.model));
  auto vocab = std::make_shared<Vocabulary>(std::move(ck.vocab));

  std::string dir = out_dir(cfg, "warmup_out");
  write_echo(cfg, dir);

  uic::StateStore store({params, vocab, ck.param_version},
                        (fs::path(dir) / "snapshots").string(),
                        cfg.get_int("snapshot.retain", 7));
  std::vector<BehaviorEvent> events = read_event_file(cfg, event_path);
  long n = store.warm_up(events);
  auto snap = store.snapshot();
  std::cout << "initialized=" << n << " failures=" << store.warmup_failures()
            << "\nsnapshot=" << snap.path << " checksum=" << snap.checksum << "\n";
  return 0;
}

int cmd_snapshot(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string ckpt_path = cfg.get_str("serve.checkpoint", "");
  std::string event_path = cfg.get_str("serve.events", "");
  MIMN_CHECK(!ckpt_path.empty(), "serve.checkpoint is required");
  Checkpoint ck = load_checkpoint(ckpt_path);
  MIMN_CHECK(!ck.baseline, "snapshot needs a memory-model checkpoint");
  auto params = std::make_shared<ModelParams>(std::move(*ck.model));
  auto vocab = std::make_shared<Vocabulary>(std::move(ck.vocab));

  std::string dir = out_dir(cfg, "snapshot_out");
  write_echo(cfg, dir);
  uic::StateStore store({params, vocab, ck.param_version},
                        (fs::path(dir) / "snapshots").string(),
                        cfg.get_int("snapshot.retain", 7));
  if (!event_path.empty()) {
    for (const BehaviorEvent& e : read_event_file(cfg, event_path)) store.apply_event(e);
  }
  auto snap = store.snapshot();
  std::cout << "id=" << snap.id << " users=" << snap.user_count
            << " param_version=" << snap.param_version << " checksum=" << snap.checksum
            << "\npath=" << snap.path << "\ncatalog_size=" << store.catalog().size() << "\n";
  return 0;
}

int cmd_rollback(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string ckpt_path = cfg.get_str("serve.checkpoint", "");
  std::string snap_path = cfg.get_str("snapshot.file", "");
  MIMN_CHECK(!ckpt_path.empty() && !snap_path.empty(),
             "serve.checkpoint and snapshot.file are required");
  Checkpoint ck = load_checkpoint(ckpt_path);
  MIMN_CHECK(!ck.baseline, "rollback needs a memory-model checkpoint");
  auto params = std::make_shared<ModelParams>(std::move(*ck.model));
  auto vocab = std::make_shared<Vocabulary>(std::move(ck.vocab));

  std::string dir = out_dir(cfg, "rollback_out");
  write_echo(cfg, dir);
  uic::StateStore store({params, vocab, ck.param_version},
                        (fs::path(dir) / "snapshots").string(),
                        cfg.get_int("snapshot.retain", 7));
  store.rollback_file(snap_path);
  std::cout << "restored_users=" << store.user_count() << " from=" << snap_path << "\n";

  std::string event_path = cfg.get_str("serve.events", "");
  if (!event_path.empty()) {
    auto events = read_event_file(cfg, event_path);
    for (const BehaviorEvent& e : events) store.apply_event(e);
    std::cout << "replayed_events=" << events.size() << "\n";
  }
  auto snap = store.snapshot();
  std::cout << "snapshot=" << snap.path << " checksum=" << snap.checksum << "\n";
  return 0;
}

// Synthetic behavior-log generator, so every command can be exercised
// without the public datasets. "drift" writes interest-drift logs in either
// format; "skew" writes a Zipf-skewed stream.
int cmd_synth(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string kind = cfg.get_str("synth.kind", "drift");
  std::string format = cfg.get_str("data.format", "amazon");
  std::string dir = out_dir(cfg, "synth_out");

  if (kind == "drift") {
    synth::DriftConfig dc;
    dc.n_users = cfg.get_int("synth.users", 1000);
    dc.min_events = cfg.get_int("synth.min_events", dc.min_events);
    dc.max_events = cfg.get_int("synth.max_events", dc.max_events);
    dc.n_clusters = cfg.get_int("synth.clusters", dc.n_clusters);
    dc.seed = static_cast<std::uint64_t>(cfg.get_long("synth.seed", 7));
    if (format == "amazon") {
      std::string reviews = (fs::path(dir) / "reviews.json").string();
      std::string meta = (fs::path(dir) / "meta.json").string();
      synth::write_amazon_files(dc, reviews, meta);
      std::cout << "reviews=" << reviews << "\nmeta=" << meta << "\n";
    } else {
      std::string path = (fs::path(dir) / "behavior.csv").string();
      synth::write_taobao_file(synth::drift_events(dc), path);
      std::cout << "events=" << path << "\n";
    }
  } else if (kind == "skew") {
    synth::SkewConfig sc;
    sc.n_users = cfg.get_int("synth.users", 400);
    sc.events_per_user = cfg.get_int("synth.events_per_user", sc.events_per_user);
    sc.seed = static_cast<std::uint64_t>(cfg.get_long("synth.seed", 11));
    std::string path = (fs::path(dir) / "behavior.csv").string();
    synth::write_taobao_file(synth::skewed_events(sc), path);
    std::cout << "events=" << path << "\n";
  } else {
    fail("synth.kind must be drift or skew");
  }
  write_echo(cfg, dir);
  return 0;
}

int cmd_bench(App& app) {
  app.load();
  Config& cfg = app.cfg;
  std::string profile_path = cfg.get_str("bench.profile", "");
  if (!profile_path.empty()) {
    // load-profile file shares the key=value format, [bench] section
    Config pf = Config::parse_file(profile_path);
    for (const char* key :
         {"bench.lengths", "bench.mode", "bench.requests", "bench.request_rate",
          "bench.event_rate", "bench.duration", "bench.users", "bench.candidates",
          "bench.seed"})
      if (pf.has(key) && !cfg.has(key)) cfg.set(key, pf.get_str(key, ""));
  }

  std::vector<int> lengths = parse_int_list(cfg.get_str("bench.lengths", "100,400,1000"));
  std::string mode = cfg.get_str("bench.mode", "both");
  long requests = cfg.get_long("bench.requests", 10000);
  double request_rate = cfg.get_double("bench.request_rate", 0.0);  // 0 = unpaced
  double event_rate = cfg.get_double("bench.event_rate", 200.0);
  double duration = cfg.get_double("bench.duration", 5.0);
  int users = cfg.get_int("bench.users", 200);
  int candidates = cfg.get_int("bench.candidates", 1);
  auto seed = static_cast<std::uint64_t>(cfg.get_long("bench.seed", 9));

  std::string dir = out_dir(cfg, "bench_out");
  cfg.set("bench.lengths", join_ints(lengths));
  cfg.set("bench.mode", mode);
  write_echo(cfg, dir);

  std::vector<bench::ServeMode> modes;
  if (mode == "uic" || mode == "both") modes.push_back(bench::ServeMode::kUic);
  if (mode == "recompute" || mode == "both") modes.push_back(bench::ServeMode::kRecompute);
  MIMN_CHECK(!modes.empty(), "bench.mode must be uic, recompute or both");

  std::ostringstream csv;
  csv << bench::BenchReport::csv_header() << "\n";
  std::cout << "mode\thistory\trequests\tp50_ms\tp90_ms\tp99_ms\tmean_ms\tqps\tbytes/user\n";
  for (int len : lengths) {
    bench::BenchDataset ds = bench::make_bench_dataset(
        users, len, cfg.get_int("bench.items", 2000), cfg.get_int("bench.cats", 50), seed);
    for (bench::ServeMode m : modes) {
      bench::LoadProfile p;
      p.mode = m;
      p.requests = requests;
      p.request_rate = request_rate;
      p.event_rate = event_rate;
      p.duration_s = duration;
      p.history_len = len;
      p.candidates_per_request = candidates;
      p.seed = seed;
      bench::BenchReport rep = bench::run_bench(p, ds);
      csv << rep.csv_row() << "\n";
      std::cout << rep.mode << "\t" << rep.history_len << "\t" << rep.requests << "\t"
                << rep.p50_ms << "\t" << rep.p90_ms << "\t" << rep.p99_ms << "\t"
                << rep.mean_ms << "\t" << rep.achieved_qps << "\t"
                << rep.state_bytes_per_user;
      if (rep.saturated) std::cout << "\t(saturated)";
      std::cout << "\n";
    }
    auto storage = bench::storage_report(ds.params->hyper, ds, {len});
    std::cout << "storage\t" << len << "\tstate_bytes=" << storage[0].state_bytes
              << "\traw_bytes=" << storage[0].raw_bytes << "\n";
  }
  std::ofstream(fs::path(dir) / "bench.csv") << csv.str();
  std::cout << "csv=" << (fs::path(dir) / "bench.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Long-sequence user-interest engine: incremental memory model, "
               "event-driven state store and serving benchmark"};
  cli.require_subcommand(1);

  App app;
  int (*handler)(App&) = nullptr;

  auto reg = [&](const char* name, const char* desc, int (*fn)(App&)) {
    CLI::App* cmd = cli.add_subcommand(name, desc);
    add_common(cmd, app);
    cmd->callback([&handler, fn] { handler = fn; });
    return cmd;
  };

  reg("ingest", "parse a behavior log into a labeled sample file", cmd_ingest);
  reg("train", "train the memory model (or the sum-pooling baseline)", cmd_train);
  reg("eval", "score a sample file with a checkpoint and report AUC", cmd_eval);
  reg("ablate", "run the ablation grid with repeated seeds", cmd_ablate);
  reg("gradcheck", "verify analytic gradients against central differences", cmd_gradcheck);
  reg("warmup", "initialize user states from historical logs and snapshot them", cmd_warmup);
  reg("serve-sim", "replay events through the state store and score requests", cmd_serve_sim);
  reg("bench", "serving latency/throughput/storage vs history length", cmd_bench);
  reg("snapshot", "write a durable copy of all user states", cmd_snapshot);
  reg("rollback", "restore user states from a snapshot file", cmd_rollback);
  reg("synth", "generate synthetic behavior logs for demos and tests", cmd_synth);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return handler ? handler(app) : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    // Configuration/usage mistakes exit 2, runtime failures exit 1.
    std::string what = e.what();
    bool usage = what.find("is required") != std::string::npos ||
                 what.find("must be") != std::string::npos ||
                 what.find("does not exist") != std::string::npos ||
                 what.find("cannot open") != std::string::npos ||
                 what.find("config") == 0;
    return usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
