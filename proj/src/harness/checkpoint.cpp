#include "lorenza/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lorenza/errors.hpp"

namespace lorenza::harness {

namespace {

constexpr char kMagic[5] = {'L', 'R', 'N', 'Z', '1'};
constexpr std::uint32_t kVersion = 1;

enum class StateTag : std::uint8_t { Adam = 1, Adazo = 2, Lorenza = 3 };

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double x : m.data()) f64(x);
  }

  template <typename Tag>
  void layers(const LayerSet<Tag>& set) {
    u64(set.size());
    for (const auto& l : set) {
      str(l.name);
      u8(l.transposed ? 1 : 0);
      matrix(l.value);
    }
  }

  void rng(const RngStream& r) {
    u64(r.seed());
    u64(r.stream_id());
    u64(r.position());
  }

  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  Matrix matrix() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if ((rows == 0) != (cols == 0)) throw CheckpointError("checkpoint: bad matrix shape");
    if (rows == 0) return {};
    if (rows > (1ull << 32) || cols > (1ull << 32)) throw CheckpointError("checkpoint: bad shape");
    need(rows * cols * 8);
    std::vector<double> data(rows * cols);
    for (double& x : data) x = f64();
    return Matrix(rows, cols, std::move(data));
  }

  template <typename Tag>
  LayerSet<Tag> layers() {
    LayerSet<Tag> set;
    const std::uint64_t n = u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string name = str();
      const bool transposed = u8() != 0;
      Matrix m = matrix();
      try {
        set.add_stored(std::move(name), std::move(m), transposed);
      } catch (const DimensionError& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
      }
    }
    return set;
  }

  RngStream rng() {
    const std::uint64_t seed = u64();
    const std::uint64_t stream = u64();
    const std::uint64_t pos = u64();
    return RngStream(seed, stream, pos);
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_state(Writer& w, const OptimizerState& state) {
  if (const auto* s = std::get_if<AdamState>(&state)) {
    w.u8(static_cast<std::uint8_t>(StateTag::Adam));
    w.layers(s->m);
    w.layers(s->v);
    w.i64(s->t);
  } else if (const auto* s = std::get_if<AdazoState>(&state)) {
    w.u8(static_cast<std::uint8_t>(StateTag::Adazo));
    w.layers(s->m);
    w.layers(s->v);
    w.i64(s->t);
  } else {
    const auto& l = std::get<LorenzaState>(state);
    w.u8(static_cast<std::uint8_t>(StateTag::Lorenza));
    w.i64(l.t);
    w.rng(l.sketch_rng);
    w.rng(l.direction_rng);
    w.u64(l.layers.size());
    for (const auto& layer : l.layers) {
      w.matrix(layer.sub.q);
      w.matrix(layer.sub.r);
      w.f64(layer.sub.source_norm);
      w.i64(layer.sub.created_at_step);
      w.matrix(layer.m);
      w.matrix(layer.v);
      w.i64(layer.t);
      w.i64(layer.last_refresh_step);
      w.f64(layer.last_lowrank_grad_norm);
    }
  }
}

OptimizerState read_state(Reader& r) {
  switch (static_cast<StateTag>(r.u8())) {
    case StateTag::Adam: {
      AdamState s{r.layers<GradTag>(), r.layers<GradTag>(), 0};
      s.t = r.i64();
      return s;
    }
    case StateTag::Adazo: {
      AdazoState s{r.layers<GradTag>(), r.layers<GradTag>(), 0};
      s.t = r.i64();
      return s;
    }
    case StateTag::Lorenza: {
      LorenzaState s;
      s.t = r.i64();
      s.sketch_rng = r.rng();
      s.direction_rng = r.rng();
      const std::uint64_t n = r.u64();
      for (std::uint64_t i = 0; i < n; ++i) {
        LorenzaLayerState layer;
        layer.sub.q = r.matrix();
        layer.sub.r = r.matrix();
        layer.sub.source_norm = r.f64();
        layer.sub.created_at_step = r.i64();
        layer.m = r.matrix();
        layer.v = r.matrix();
        layer.t = r.i64();
        layer.last_refresh_step = r.i64();
        layer.last_lowrank_grad_norm = r.f64();
        s.layers.push_back(std::move(layer));
      }
      return s;
    }
  }
  throw CheckpointError("checkpoint: unknown optimizer state tag");
}

}  // namespace

std::string encode_checkpoint(const TrialSnapshot& snap) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(snap.config_hash);
  w.u64(snap.seed);
  w.i64(snap.step);
  w.u64(snap.value_calls);
  w.u64(snap.gradient_calls);
  w.u64(snap.refreshes);
  w.str(snap.metrics);
  w.layers(snap.params);
  w.rng(snap.optimizer_rng);
  write_state(w, snap.optimizer);
  const std::uint64_t sum = fnv1a64(w.buffer());
  w.u64(sum);
  return std::move(w.buffer());
}

TrialSnapshot decode_checkpoint(std::string_view bytes,
                                std::optional<std::uint64_t> expected_hash) {
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("checkpoint: bad magic (not an LRNZ1 file)");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (fnv1a64(body) != tail.u64()) throw CheckpointError("checkpoint: checksum mismatch");

  Reader r(body.substr(sizeof kMagic));
  if (const std::uint32_t v = r.u32(); v != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(v));
  TrialSnapshot snap;
  snap.config_hash = r.u64();
  if (expected_hash && *expected_hash != snap.config_hash)
    throw CheckpointError("checkpoint: config hash mismatch (checkpoint was written by a "
                          "different configuration)");
  snap.seed = r.u64();
  snap.step = r.i64();
  snap.value_calls = r.u64();
  snap.gradient_calls = r.u64();
  snap.refreshes = r.u64();
  snap.metrics = r.str();
  snap.params = r.layers<ParamTag>();
  snap.optimizer_rng = r.rng();
  snap.optimizer = read_state(r);
  if (r.pos() != body.size() - sizeof kMagic)
    throw CheckpointError("checkpoint: trailing bytes");
  return snap;
}

void checkpoint_save(const std::filesystem::path& path, const TrialSnapshot& snap) {
  const std::string bytes = encode_checkpoint(snap);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("checkpoint: write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

TrialSnapshot checkpoint_load(const std::filesystem::path& path,
                              std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, expected_hash);
}

}  // namespace lorenza::harness
