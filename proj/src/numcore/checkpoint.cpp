#include "blocknav/numcore/checkpoint.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/world_io.hpp"

#include <bit>
#include <cstring>

namespace blocknav::nc {
namespace {

constexpr char kMagic[4] = {'B', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Cursor {
public:
  explicit Cursor(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const ParamStore& params, const std::string& meta) {
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::string& name = params.name(p);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const Tensor& t = params.value(p);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Cursor c(bytes);
  if (c.take(4) != std::string(kMagic, 4)) throw DataError("not a checkpoint file (bad magic)");
  const std::uint32_t version = c.u32();
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const std::uint32_t count = c.u32();
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::string name = c.take(c.u32());
    const std::uint32_t rank = c.u32();
    std::vector<std::size_t> shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(c.u32());
    Tensor t(shape);
    for (double& v : t.data()) v = static_cast<double>(std::bit_cast<float>(c.u32()));
    ck.params.add(name, std::move(t));
  }
  ck.meta = c.take(c.u32());
  if (!c.done()) throw DataError("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const std::string& meta) {
  write_file(path, encode_checkpoint(params, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

} // namespace blocknav::nc
