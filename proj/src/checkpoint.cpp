#include "kdpg/checkpoint.hpp"
#include <algorithm>
#include <array>
#include <optional>

#include <bit>
#include <cstring>

#include "kdpg/io.hpp"

namespace kdpg {

namespace {

constexpr std::string_view kMagic = "KDPGCKPT";

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    auto raw = std::bit_cast<std::array<char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    out_.append(raw.data(), raw.size());
  }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void put_raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T get() {
    std::array<char, sizeof(T)> raw{};
    take(raw.data(), raw.size());
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }
  void take(char* dst, std::size_t n) {
    if (in_.size() - pos_ < n) fail("unexpected end of data");
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

  [[noreturn]] static void fail(const std::string& what) { throw Error("CheckpointError", what); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_policy(const Policy& policy) {
  Writer w;
  w.put_raw(kMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint8_t>(policy.arch()));
  const auto surfaces = policy.vocab().surfaces();
  w.put(static_cast<std::uint32_t>(surfaces.size()));
  for (const auto& s : surfaces) w.put_string(s);
  if (policy.arch() == Policy::Arch::Neural) {
    const auto& shape = policy.neural_shape();
    w.put(static_cast<std::uint64_t>(shape.context));
    w.put(static_cast<std::uint64_t>(shape.embed));
    w.put(static_cast<std::uint64_t>(shape.hidden));
  } else {
    w.put(static_cast<std::uint64_t>(policy.order()));
  }
  const auto params = policy.params();
  w.put(static_cast<std::uint32_t>(policy.blocks().size()));
  for (const auto& b : policy.blocks()) {
    w.put_string(b.name);
    w.put(static_cast<std::uint64_t>(b.rows));
    w.put(static_cast<std::uint64_t>(b.cols));
    for (std::size_t i = 0; i < b.size(); ++i) w.put(params[b.offset + i]);
  }
  return w.take();
}

Policy deserialize_policy(std::string_view bytes) {
  Reader r(bytes);
  std::string magic(kMagic.size(), '\0');
  r.take(magic.data(), magic.size());
  if (magic != kMagic) Reader::fail("bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    Reader::fail("unsupported version " + std::to_string(version));
  }
  const auto arch = r.get<std::uint8_t>();
  const auto vocab_size = r.get<std::uint32_t>();
  if (vocab_size > 0xFFFF) Reader::fail("vocabulary too large");
  std::vector<std::string> surfaces;
  for (std::uint32_t i = 0; i < vocab_size; ++i) surfaces.push_back(r.get_string());
  Vocab vocab(surfaces);
  if (vocab.size() != vocab_size) Reader::fail("vocabulary lacks BOS/EOS");

  std::optional<Policy> policy;
  if (arch == static_cast<std::uint8_t>(Policy::Arch::Neural)) {
    NeuralShape shape;
    shape.context = r.get<std::uint64_t>();
    shape.embed = r.get<std::uint64_t>();
    shape.hidden = r.get<std::uint64_t>();
    if (shape.context > 4096 || shape.embed > 4096 || shape.hidden > 4096) {
      Reader::fail("implausible neural shape");
    }
    policy = Policy::neural(std::move(vocab), shape, 0);
  } else if (arch == static_cast<std::uint8_t>(Policy::Arch::Tabular)) {
    const auto order = r.get<std::uint64_t>();
    if (order < 1 || order > 16) Reader::fail("implausible tabular order");
    policy = Policy::tabular(std::move(vocab), order, 0);
  } else {
    Reader::fail("unknown architecture");
  }

  auto params = policy->params();
  const auto& blocks = policy->blocks();
  if (r.get<std::uint32_t>() != blocks.size()) Reader::fail("block count mismatch");
  for (const auto& b : blocks) {
    const std::string name = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (name != b.name || rows != b.rows || cols != b.cols) {
      Reader::fail("block '" + name + "' does not match expected '" + b.name + "' " +
                   std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    for (std::size_t i = 0; i < b.size(); ++i) params[b.offset + i] = r.get<double>();
  }
  if (!r.done()) Reader::fail("trailing bytes");
  return std::move(*policy);
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  write_file(path, serialize_policy(policy));
}

Policy load_policy(const std::filesystem::path& path) { return deserialize_policy(read_file(path)); }

}  // namespace kdpg
