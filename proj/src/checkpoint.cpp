#include "mimn/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "mimn/crc64.hpp"

namespace mimn {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'M', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormat = 1;

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}
template <class T>
void put(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(v));
}
void put_str(std::string& buf, const std::string& s) {
  put(buf, static_cast<std::uint32_t>(s.size()));
  put_bytes(buf, s.data(), s.size());
}
void put_tensor(std::string& buf, const std::string& name, const Tensor& t) {
  put_str(buf, name);
  put(buf, static_cast<std::uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put(buf, static_cast<std::int32_t>(t.dim(i)));
  put_bytes(buf, t.data().data(), t.data().size() * sizeof(double));
}

struct Reader {
  const char* p;
  const char* end;
  void read(void* out, std::size_t n) {
    MIMN_CHECK(p + n <= end, "checkpoint truncated");
    std::memcpy(out, p, n);
    p += n;
  }
  template <class T>
  T get() {
    T v;
    read(&v, sizeof(v));
    return v;
  }
  std::string get_str() {
    std::uint32_t n = get<std::uint32_t>();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  Tensor get_tensor(std::string* name) {
    *name = get_str();
    int rank = get<std::uint8_t>();
    std::vector<int> shape;
    for (int i = 0; i < rank; ++i) shape.push_back(get<std::int32_t>());
    Tensor t(shape);
    read(t.data().data(), t.data().size() * sizeof(double));
    return t;
  }
};

void put_hyper(std::string& buf, const HyperParams& h) {
  put(buf, static_cast<std::int32_t>(h.slots));
  put(buf, static_cast<std::int32_t>(h.width));
  put(buf, static_cast<std::int32_t>(h.miu_width));
  put(buf, static_cast<std::int32_t>(h.k_top));
  put(buf, static_cast<std::int32_t>(h.profile_dim));
  put(buf, h.lambda);
  put(buf, h.init_scale);
  put(buf, static_cast<std::uint8_t>(h.use_mur));
  put(buf, static_cast<std::uint8_t>(h.use_miu));
  put(buf, static_cast<std::uint32_t>(h.mlp_widths.size()));
  for (int w : h.mlp_widths) put(buf, static_cast<std::int32_t>(w));
}

HyperParams get_hyper(Reader& r) {
  HyperParams h;
  h.slots = r.get<std::int32_t>();
  h.width = r.get<std::int32_t>();
  h.miu_width = r.get<std::int32_t>();
  h.k_top = r.get<std::int32_t>();
  h.profile_dim = r.get<std::int32_t>();
  h.lambda = r.get<double>();
  h.init_scale = r.get<double>();
  h.use_mur = r.get<std::uint8_t>() != 0;
  h.use_miu = r.get<std::uint8_t>() != 0;
  std::uint32_t n = r.get<std::uint32_t>();
  h.mlp_widths.clear();
  for (std::uint32_t i = 0; i < n; ++i) h.mlp_widths.push_back(r.get<std::int32_t>());
  return h;
}

void put_vocab(std::string& buf, const Vocabulary& v) {
  put(buf, static_cast<std::uint32_t>(v.category_count() - 1));
  for (int c = 1; c < v.category_count(); ++c) put_str(buf, v.category_id(c));
  put(buf, static_cast<std::uint32_t>(v.item_count() - 1));
  for (int i = 1; i < v.item_count(); ++i) {
    put_str(buf, v.item_id(i));
    put(buf, static_cast<std::int32_t>(v.item_category(i)));
  }
}

Vocabulary get_vocab(Reader& r) {
  Vocabulary v;
  std::uint32_t nc = r.get<std::uint32_t>();
  for (std::uint32_t c = 0; c < nc; ++c) v.add_category(r.get_str());
  std::uint32_t ni = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < ni; ++i) {
    std::string id = r.get_str();
    int cat = r.get<std::int32_t>();
    v.add_item(id, cat);
  }
  return v;
}

template <class Params>
void write_file(const std::string& path, const Params& params, const Vocabulary& vocab,
                std::int64_t version, bool baseline) {
  std::string buf;
  put_bytes(buf, kMagic, sizeof(kMagic));
  put(buf, kFormat);
  put(buf, version);
  put(buf, static_cast<std::uint8_t>(baseline ? 1 : 0));
  put_hyper(buf, params.hyper);
  put(buf, static_cast<std::int32_t>(params.n_items));
  put(buf, static_cast<std::int32_t>(params.n_cats));
  put_vocab(buf, vocab);
  auto named = params.named_tensors();
  put(buf, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) put_tensor(buf, name, *tensor);
  put(buf, crc64(buf.data(), buf.size()));

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    MIMN_CHECK(out.good(), "cannot write checkpoint: " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    MIMN_CHECK(out.good(), "checkpoint write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <class Params>
void fill_tensors(Reader& r, Params& params) {
  std::uint32_t count = r.get<std::uint32_t>();
  ParamList list = params.param_list();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name;
    Tensor t = r.get_tensor(&name);
    bool found = false;
    for (ParamRef& ref : list)
      if (ref.name == name) {
        MIMN_CHECK(ref.tensor->same_shape(t),
                   "checkpoint tensor shape mismatch for " + name);
        *ref.tensor = std::move(t);
        found = true;
        break;
      }
    MIMN_CHECK(found, "checkpoint contains unknown tensor: " + name);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Vocabulary& vocab, std::int64_t param_version) {
  write_file(path, params, vocab, param_version, false);
}

void save_baseline_checkpoint(const std::string& path, const BaselineParams& params,
                              const Vocabulary& vocab, std::int64_t param_version) {
  write_file(path, params, vocab, param_version, true);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MIMN_CHECK(in.good(), "cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  MIMN_CHECK(buf.size() > sizeof(kMagic) + sizeof(std::uint64_t), "checkpoint too short");

  std::uint64_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 8, 8);
  MIMN_CHECK(crc64(buf.data(), buf.size() - 8) == stored_crc,
             "checkpoint checksum mismatch: " + path);

  Reader r{buf.data(), buf.data() + buf.size() - 8};
  char magic[8];
  r.read(magic, sizeof(magic));
  MIMN_CHECK(std::memcmp(magic, kMagic, 8) == 0, "not a checkpoint file: " + path);
  MIMN_CHECK(r.get<std::uint32_t>() == kFormat, "unsupported checkpoint format");

  Checkpoint ck;
  ck.param_version = r.get<std::int64_t>();
  ck.baseline = r.get<std::uint8_t>() != 0;
  HyperParams hyper = get_hyper(r);
  int n_items = r.get<std::int32_t>();
  int n_cats = r.get<std::int32_t>();
  ck.vocab = get_vocab(r);
  MIMN_CHECK(ck.vocab.item_count() == n_items && ck.vocab.category_count() == n_cats,
             "checkpoint vocabulary size mismatch");

  // Rebuild zeroed parameter holders of the right shapes, then overwrite
  // every tensor from the file.
  Rng rng(0);
  if (ck.baseline) {
    ck.baseline_model = BaselineParams::init(hyper, n_items, n_cats, rng);
    fill_tensors(r, *ck.baseline_model);
  } else {
    ck.model = ModelParams::init(hyper, n_items, n_cats, rng);
    fill_tensors(r, *ck.model);
  }
  MIMN_CHECK(r.p == r.end, "checkpoint has trailing bytes");
  return ck;
}

}  // namespace mimn
