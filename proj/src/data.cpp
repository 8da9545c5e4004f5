#include "mimn/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mimn {

Vocabulary::Vocabulary() {
  items_.push_back("<oov>");
  cats_.push_back("<oov>");
  item_cat_.push_back(0);
  item_idx_.emplace("<oov>", 0);
  cat_idx_.emplace("<oov>", 0);
}

int Vocabulary::add_category(const std::string& id) {
  auto it = cat_idx_.find(id);
  if (it != cat_idx_.end()) return it->second;
  int idx = static_cast<int>(cats_.size());
  cats_.push_back(id);
  cat_idx_.emplace(id, idx);
  return idx;
}

int Vocabulary::add_item(const std::string& id, int cat_index) {
  auto it = item_idx_.find(id);
  if (it != item_idx_.end()) return it->second;
  MIMN_CHECK(cat_index >= 0 && cat_index < category_count(), "add_item: bad category index");
  int idx = static_cast<int>(items_.size());
  items_.push_back(id);
  item_cat_.push_back(cat_index);
  item_idx_.emplace(id, idx);
  return idx;
}

int Vocabulary::item_index(const std::string& id) const {
  auto it = item_idx_.find(id);
  return it == item_idx_.end() ? 0 : it->second;
}

int Vocabulary::category_index(const std::string& id) const {
  auto it = cat_idx_.find(id);
  return it == cat_idx_.end() ? 0 : it->second;
}

namespace {

bool clean_id(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == '\t' || c == '\n' || c == '\r' || c == ' ') return false;
  return true;
}

std::vector<BehaviorEvent> read_taobao(const std::string& path, IngestStats* stats) {
  std::ifstream in(path);
  MIMN_CHECK(in.good(), "cannot open behavior log: " + path);
  std::vector<BehaviorEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (stats) stats->rows_read++;
    // user_id,item_id,category_id,behavior_type,timestamp
    std::array<std::string, 5> col;
    size_t start = 0, ci = 0;
    bool ok = true;
    for (; ci < 5; ++ci) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        if (ci != 4) ok = false;
        col[ci] = line.substr(start);
        ++ci;
        break;
      }
      col[ci] = line.substr(start, comma - start);
      start = comma + 1;
    }
    if (!ok || ci != 5) {
      if (stats) stats->rows_skipped++;
      continue;
    }
    if (col[3] != "pv") {  // click rows only
      if (stats) stats->rows_skipped++;
      continue;
    }
    if (!clean_id(col[0]) || !clean_id(col[1]) || !clean_id(col[2])) {
      if (stats) stats->rows_skipped++;
      continue;
    }
    std::int64_t ts = 0;
    try {
      ts = std::stoll(col[4]);
    } catch (...) {
      if (stats) stats->rows_skipped++;
      continue;
    }
    if (ts < 0) {
      if (stats) stats->rows_skipped++;
      continue;
    }
    events.push_back({col[0], col[1], col[2], ts});
  }
  return events;
}

// Reviews dump: one JSON record per line with reviewerID, asin,
// unixReviewTime; categories joined from the metadata file by asin.
std::vector<BehaviorEvent> read_amazon(const std::string& path, const std::string& meta_path,
                                       IngestStats* stats) {
  std::unordered_map<std::string, std::string> asin_cat;
  if (!meta_path.empty()) {
    std::ifstream meta(meta_path);
    MIMN_CHECK(meta.good(), "cannot open item metadata: " + meta_path);
    std::string line;
    while (std::getline(meta, line)) {
      if (line.empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        std::string asin = j.at("asin").get<std::string>();
        std::string cat;
        if (j.contains("category")) {
          cat = j["category"].get<std::string>();
        } else if (j.contains("categories")) {
          const auto& paths = j["categories"];
          if (paths.is_array() && !paths.empty() && paths[0].is_array() && !paths[0].empty())
            cat = paths[0].back().get<std::string>();
        }
        if (!cat.empty()) asin_cat[asin] = cat;
      } catch (...) {
        if (stats) stats->rows_skipped++;
      }
    }
  }

  std::ifstream in(path);
  MIMN_CHECK(in.good(), "cannot open reviews file: " + path);
  std::vector<BehaviorEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (stats) stats->rows_read++;
    try {
      auto j = nlohmann::json::parse(line);
      BehaviorEvent e;
      e.user_id = j.at("reviewerID").get<std::string>();
      e.item_id = j.at("asin").get<std::string>();
      e.timestamp = j.at("unixReviewTime").get<std::int64_t>();
      auto it = asin_cat.find(e.item_id);
      e.category_id = it == asin_cat.end() ? "unknown" : it->second;
      if (!clean_id(e.user_id) || !clean_id(e.item_id) || !clean_id(e.category_id) ||
          e.timestamp < 0) {
        if (stats) stats->rows_skipped++;
        continue;
      }
      events.push_back(std::move(e));
    } catch (...) {
      if (stats) stats->rows_skipped++;
    }
  }
  return events;
}

}  // namespace

std::vector<BehaviorEvent> read_events(const std::string& path, LogFormat format,
                                       const std::string& meta_path, IngestStats* stats) {
  return format == LogFormat::kTaobao ? read_taobao(path, stats)
                                      : read_amazon(path, meta_path, stats);
}

Dataset ingest(const std::string& path, const IngestOptions& opts) {
  MIMN_CHECK(opts.min_len >= 2, "min_len must be at least 2 (history plus target)");
  MIMN_CHECK(opts.max_len >= 1, "max_len must be positive");
  Dataset ds;
  std::vector<BehaviorEvent> events =
      read_events(path, opts.format, opts.meta_path, &ds.stats);

  // Group by user, preserving first-appearance order for determinism.
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<size_t>> by_user;
  for (size_t i = 0; i < events.size(); ++i) {
    auto [it, fresh] = by_user.try_emplace(events[i].user_id);
    if (fresh) user_order.push_back(events[i].user_id);
    it->second.push_back(i);
  }
  ds.stats.users_seen = static_cast<long>(user_order.size());

  for (const std::string& user : user_order) {
    auto& idx = by_user[user];
    if (static_cast<int>(idx.size()) < opts.min_len) {
      ds.stats.users_dropped++;
      continue;
    }
    // Timestamp order; stable sort keeps file order on ties.
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return events[a].timestamp < events[b].timestamp;
    });

    const BehaviorEvent& target = events[idx.back()];
    int first = std::max(0, static_cast<int>(idx.size()) - 1 - opts.max_len);
    Sample s;
    s.user_id = user;
    for (int k = first; k + 1 < static_cast<int>(idx.size()); ++k) {
      const BehaviorEvent& e = events[idx[static_cast<size_t>(k)]];
      int c = ds.vocab.add_category(e.category_id);
      int i = ds.vocab.add_item(e.item_id, c);
      s.history.emplace_back(i, c);
    }
    int tc = ds.vocab.add_category(target.category_id);
    int ti = ds.vocab.add_item(target.item_id, tc);
    s.target_item = ti;
    s.target_cat = tc;
    s.label = 1;
    ds.samples.push_back(std::move(s));
  }
  MIMN_CHECK(!ds.samples.empty(), "ingest produced no samples from " + path);
  return ds;
}

std::vector<Sample> negative_sample(const std::vector<Sample>& positives,
                                    const Vocabulary& vocab, std::uint64_t seed) {
  MIMN_CHECK(vocab.item_count() > 1, "vocabulary has no real items");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(positives.size() * 2);
  std::vector<char> excluded(static_cast<size_t>(vocab.item_count()));
  for (const Sample& pos : positives) {
    MIMN_CHECK(pos.label == 1, "negative_sample expects positive samples");
    out.push_back(pos);

    std::fill(excluded.begin(), excluded.end(), 0);
    excluded[0] = 1;  // never draw the OOV id
    int n_excluded = 1;
    auto exclude = [&](int item) {
      if (!excluded[static_cast<size_t>(item)]) {
        excluded[static_cast<size_t>(item)] = 1;
        ++n_excluded;
      }
    };
    for (const auto& [item, cat] : pos.history) exclude(item);
    exclude(pos.target_item);
    MIMN_CHECK(n_excluded < vocab.item_count(),
               "no eligible negative item for user " + pos.user_id +
                   ": vocabulary smaller than the history");

    std::uniform_int_distribution<int> draw(1, vocab.item_count() - 1);
    int item = draw(rng);
    while (excluded[static_cast<size_t>(item)]) item = draw(rng);

    Sample neg = pos;
    neg.target_item = item;
    neg.target_cat = vocab.item_category(item);
    neg.label = 0;
    out.push_back(std::move(neg));
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& samples,
                                                          const SplitPolicy& policy) {
  MIMN_CHECK(policy.test_fraction > 0.0 && policy.test_fraction < 1.0,
             "test_fraction must be in (0,1)");
  std::vector<Sample> train, test;
  const std::uint64_t den = 1u << 20;
  auto cut = static_cast<std::uint64_t>(policy.test_fraction * static_cast<double>(den));
  for (const Sample& s : samples) {
    if (fnv1a64(s.user_id, policy.seed) % den < cut)
      test.push_back(s);
    else
      train.push_back(s);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace mimn
