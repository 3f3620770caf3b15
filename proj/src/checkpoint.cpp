#include "onramp/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

namespace onramp {

namespace {

constexpr std::array<char, 8> kMagic = {'O', 'N', 'R', 'A', 'M', 'P', 'C', 'K'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    const auto bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void put_bytes(std::string_view s) { bytes_.append(s); }
  void put_vector(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v[i]);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Eigen::VectorXd get_vector(std::size_t n) {
    need(n * 8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = get<double>();
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto n = network_parameter_count();
  if (static_cast<std::size_t>(checkpoint.params.values.size()) != n ||
      static_cast<std::size_t>(checkpoint.optimizer.first_moment.size()) != n ||
      static_cast<std::size_t>(checkpoint.optimizer.second_moment.size()) != n) {
    throw CheckpointError("save_checkpoint: parameter shapes do not match the network layout");
  }
  Writer w;
  w.put_bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.put(kCheckpointVersion);
  w.put(checkpoint.config_hash);
  w.put(checkpoint.train_step);
  w.put(checkpoint.optimizer.step);
  const auto& layout = network_layout();
  w.put(static_cast<std::uint32_t>(layout.size()));
  for (const auto& t : layout) {
    w.put(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put(static_cast<std::uint32_t>(t.rows));
    w.put(static_cast<std::uint32_t>(t.cols));
  }
  w.put_vector(checkpoint.params.values);
  w.put_vector(checkpoint.optimizer.first_moment);
  w.put_vector(checkpoint.optimizer.second_moment);
  const auto checksum = fnv1a64(w.bytes());
  w.put(checksum);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(bytes);
  if (r.get_bytes(kMagic.size()) != std::string_view(kMagic.data(), kMagic.size())) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = r.get<std::uint64_t>();
  c.train_step = r.get<std::int64_t>();
  const auto opt_step = r.get<std::int64_t>();

  const auto& layout = network_layout();
  const auto count = r.get<std::uint32_t>();
  if (count != layout.size()) throw CheckpointError("checkpoint tensor count does not match network");
  for (const auto& t : layout) {
    const auto len = r.get<std::uint32_t>();
    const auto name = r.get_bytes(len);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (name != t.name || rows != static_cast<std::uint32_t>(t.rows) ||
        cols != static_cast<std::uint32_t>(t.cols)) {
      throw CheckpointError("checkpoint shape mismatch at tensor " + t.name);
    }
  }
  const auto n = network_parameter_count();
  auto params = r.get_vector(n);
  auto m = r.get_vector(n);
  auto v = r.get_vector(n);
  const auto body_end = r.position();
  const auto stored = r.get<std::uint64_t>();
  if (r.position() != bytes.size()) throw CheckpointError("trailing bytes in checkpoint");
  if (fnv1a64(std::string_view(bytes).substr(0, body_end)) != stored) {
    throw CheckpointError("checkpoint checksum mismatch");
  }
  c.params.values = std::move(params);
  c.optimizer.first_moment = std::move(m);
  c.optimizer.second_moment = std::move(v);
  c.optimizer.step = opt_step;
  return c;
}

}  // namespace onramp
