#include <fstream>
#include <sstream>

#include "mimn/data.hpp"

namespace mimn {

// Sample file layout (line-delimited text, tab-separated fields):
//
//   MIMNSAMPLES 1
//   items <n>                     n real items; vocab indices 1..n in order
//   <item_id>\t<category_index>   one per line
//   categories <n>                n real categories; indices 1..n in order
//   <category_id>
//   samples <n>
//   <user>\t<label>\t<target_item>\t<target_cat>\t<len>\t<i>:<c> <i>:<c> ...
//
// Everything is integers and verbatim id strings, so the round-trip is
// byte-exact.

void save_samples(const std::string& path, const std::vector<Sample>& samples,
                  const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  MIMN_CHECK(out.good(), "cannot write sample file: " + path);
  out << "MIMNSAMPLES 1\n";
  out << "items " << vocab.item_count() - 1 << "\n";
  for (int i = 1; i < vocab.item_count(); ++i)
    out << vocab.item_id(i) << "\t" << vocab.item_category(i) << "\n";
  out << "categories " << vocab.category_count() - 1 << "\n";
  for (int c = 1; c < vocab.category_count(); ++c) out << vocab.category_id(c) << "\n";
  out << "samples " << samples.size() << "\n";
  for (const Sample& s : samples) {
    out << s.user_id << "\t" << s.label << "\t" << s.target_item << "\t" << s.target_cat
        << "\t" << s.history.size() << "\t";
    for (size_t k = 0; k < s.history.size(); ++k) {
      if (k) out << ' ';
      out << s.history[k].first << ':' << s.history[k].second;
    }
    out << "\n";
  }
  MIMN_CHECK(out.good(), "write failed: " + path);
}

namespace {

std::string expect_line(std::istream& in, const std::string& what) {
  std::string line;
  MIMN_CHECK(static_cast<bool>(std::getline(in, line)), "sample file truncated at " + what);
  return line;
}

long expect_count(const std::string& line, const std::string& key) {
  MIMN_CHECK(line.rfind(key + " ", 0) == 0, "sample file: expected '" + key + " <n>', got: " + line);
  return std::stol(line.substr(key.size() + 1));
}

}  // namespace

std::pair<std::vector<Sample>, Vocabulary> load_samples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MIMN_CHECK(in.good(), "cannot open sample file: " + path);
  MIMN_CHECK(expect_line(in, "header") == "MIMNSAMPLES 1",
             "not a sample file (bad magic): " + path);

  long n_items = expect_count(expect_line(in, "items"), "items");
  struct PendingItem {
    std::string id;
    int cat;
  };
  std::vector<PendingItem> pending;
  pending.reserve(static_cast<size_t>(n_items));
  for (long i = 0; i < n_items; ++i) {
    std::string line = expect_line(in, "item row");
    size_t tab = line.find('\t');
    MIMN_CHECK(tab != std::string::npos, "item row missing category: " + line);
    pending.push_back({line.substr(0, tab), std::stoi(line.substr(tab + 1))});
  }

  Vocabulary vocab;
  long n_cats = expect_count(expect_line(in, "categories"), "categories");
  for (long c = 0; c < n_cats; ++c) vocab.add_category(expect_line(in, "category row"));
  for (const auto& p : pending) {
    MIMN_CHECK(p.cat >= 0 && p.cat < vocab.category_count(),
               "item category index out of range: " + p.id);
    vocab.add_item(p.id, p.cat);
  }

  long n_samples = expect_count(expect_line(in, "samples"), "samples");
  std::vector<Sample> samples;
  samples.reserve(static_cast<size_t>(n_samples));
  for (long k = 0; k < n_samples; ++k) {
    std::istringstream row(expect_line(in, "sample row"));
    Sample s;
    std::string field;
    MIMN_CHECK(static_cast<bool>(std::getline(row, s.user_id, '\t')), "sample row: user");
    auto int_field = [&](const char* what) {
      MIMN_CHECK(static_cast<bool>(std::getline(row, field, '\t')),
                 std::string("sample row: ") + what);
      return std::stoi(field);
    };
    s.label = int_field("label");
    s.target_item = int_field("target_item");
    s.target_cat = int_field("target_cat");
    long len = int_field("len");
    MIMN_CHECK(static_cast<bool>(std::getline(row, field)), "sample row: history");
    std::istringstream hist(field);
    std::string pairtok;
    while (hist >> pairtok) {
      size_t colon = pairtok.find(':');
      MIMN_CHECK(colon != std::string::npos, "bad history pair: " + pairtok);
      s.history.emplace_back(std::stoi(pairtok.substr(0, colon)),
                             std::stoi(pairtok.substr(colon + 1)));
    }
    MIMN_CHECK(static_cast<long>(s.history.size()) == len,
               "history length mismatch for user " + s.user_id);
    MIMN_CHECK(s.label == 0 || s.label == 1, "label must be 0/1");
    samples.push_back(std::move(s));
  }
  return {std::move(samples), std::move(vocab)};
}

}  // namespace mimn
