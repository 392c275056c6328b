#include "rankgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "rankgan/error.hpp"

namespace rankgan {
namespace {

constexpr unsigned char kMagic[4] = {'R', 'K', 'G', 'N'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  std::vector<unsigned char> buf;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : bytes(b) {}
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw FormatError("checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t tensor_checksum(const Tensor& t) {
  Writer w;
  for (double v : t.data()) w.f64(v);
  return fnv1a64(w.buf);
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

void Checkpoint::set_field(const std::string& name, std::uint64_t value) {
  for (auto& [n, v] : fields_) {
    if (n == name) {
      v = value;
      return;
    }
  }
  fields_.emplace_back(name, value);
}

std::uint64_t Checkpoint::field(const std::string& name) const {
  for (const auto& [n, v] : fields_)
    if (n == name) return v;
  throw FormatError("checkpoint of kind '" + kind + "' lacks header field '" + name + "'");
}

bool Checkpoint::has_field(const std::string& name) const {
  for (const auto& f : fields_)
    if (f.first == name) return true;
  return false;
}

void Checkpoint::add_block(const std::string& name, const Tensor& t) {
  blocks_.emplace_back(name, t);
}

const Tensor& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, t] : blocks_)
    if (n == name) return t;
  throw FormatError("checkpoint of kind '" + kind + "' lacks parameter block '" + name + "'");
}

std::vector<unsigned char> Checkpoint::serialize() const {
  Writer w;
  w.buf.insert(w.buf.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(version);
  w.str(kind);
  w.u32(static_cast<std::uint32_t>(fields_.size()));
  for (const auto& [n, v] : fields_) {
    w.str(n);
    w.u64(v);
  }
  w.u32(static_cast<std::uint32_t>(blocks_.size()));
  for (const auto& [n, t] : blocks_) {
    w.str(n);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return std::move(w.buf);
}

Checkpoint Checkpoint::deserialize(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint file");
  r.pos = 4;
  Checkpoint c;
  c.version = r.u32();
  if (c.version > kCheckpointVersion) {
    throw FormatError("checkpoint format version " + std::to_string(c.version) +
                      " is newer than supported version " +
                      std::to_string(kCheckpointVersion));
  }
  if (c.version == 0) throw FormatError("checkpoint format version 0 is invalid");
  c.kind = r.str();
  const std::uint32_t nfields = r.u32();
  for (std::uint32_t i = 0; i < nfields; ++i) {
    std::string name = r.str();
    c.fields_.emplace_back(std::move(name), r.u64());
  }
  const std::uint32_t nblocks = r.u32();
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    std::string name = r.str();
    const std::uint32_t ndim = r.u32();
    Shape shape(ndim);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_size(shape);
    r.need(n * 8);
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    c.blocks_.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.pos != bytes.size()) throw FormatError("trailing bytes after checkpoint blocks");
  return c;
}

std::string Checkpoint::manifest() const {
  std::ostringstream os;
  os << "format_version " << version << '\n' << "kind " << kind << '\n';
  for (const auto& [n, v] : fields_) os << "field " << n << ' ' << v << '\n';
  for (const auto& [n, t] : blocks_) {
    os << "block " << n << ' ' << shape_string(t.shape()) << ' ' << hex64(tensor_checksum(t))
       << '\n';
  }
  return os.str();
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + path.string());
  }
  std::ofstream man(path.string() + ".manifest", std::ios::trunc);
  if (!man) throw FormatError("cannot write manifest for " + path.string());
  man << manifest();
}

Checkpoint Checkpoint::load(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Checkpoint c = deserialize(bytes);
  if (!expected_kind.empty() && c.kind != expected_kind) {
    throw FormatError("checkpoint " + path.string() + " holds a '" + c.kind +
                      "', expected '" + expected_kind + "'");
  }
  const std::filesystem::path man_path = path.string() + ".manifest";
  if (std::filesystem::exists(man_path)) {
    std::ifstream man(man_path);
    std::ostringstream os;
    os << man.rdbuf();
    if (os.str() != c.manifest()) {
      throw FormatError("checkpoint " + path.string() + " does not match its manifest");
    }
  }
  return c;
}

}  // namespace rankgan
