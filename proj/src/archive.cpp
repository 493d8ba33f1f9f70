#include "morph/archive.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

MORPH_BEGIN_NAMESPACE

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

const Tensor* Archive::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t.tensor;
  return nullptr;
}

const Tensor& Archive::at(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw std::runtime_error("archive has no tensor named '" + name + "'");
}

const std::string& Archive::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("archive has no meta key '" + key + "'");
  return it->second;
}

std::string serialize_archive(const Archive& archive) {
  std::ostringstream head;
  head << "MORPHARCHIVE 1\n";
  for (const auto& [k, v] : archive.meta) {
    if (k.find_first_of(" \n\t") != std::string::npos || v.find_first_of(" \n\t") != std::string::npos ||
        v.empty())
      throw std::invalid_argument("archive meta '" + k + "' must be a non-empty whitespace-free token");
    head << "meta " << k << ' ' << v << '\n';
  }
  std::size_t offset = 0;
  for (const auto& t : archive.tensors) {
    if (t.name.empty() || t.name.find_first_of(" \n\t") != std::string::npos)
      throw std::invalid_argument("archive tensor name '" + t.name + "' is not a token");
    const auto nbytes = t.tensor.values().size() * sizeof(Real);
    head << "tensor " << t.name << ' ' << kRealName << ' ' << t.tensor.ndim();
    for (auto d : t.tensor.shape()) head << ' ' << d;
    head << ' ' << offset << ' ' << nbytes << '\n';
    offset += nbytes;
  }
  head << "data " << offset << '\n';
  std::string out = head.str();
  out.reserve(out.size() + offset);
  for (const auto& t : archive.tensors)
    out.append(reinterpret_cast<const char*>(t.tensor.values().data()), t.tensor.values().size() * sizeof(Real));
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  // Next header line split into tokens; throws at EOF.
  std::vector<std::string> line() {
    const auto start = pos_;
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string::npos) throw ArchiveError("unterminated header line", start);
    line_start_ = start;
    pos_ = end + 1;
    std::vector<std::string> tokens;
    std::istringstream is(bytes_.substr(start, end - start));
    for (std::string tok; is >> tok;) tokens.push_back(tok);
    if (tokens.empty()) throw ArchiveError("empty header line", start);
    return tokens;
  }

  std::size_t line_start() const { return line_start_; }

  template <class T>
  T number(const std::string& tok) const {
    T v{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw ArchiveError("malformed number '" + tok + "'", line_start_);
    return v;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
  std::size_t line_start_ = 0;
};

struct Entry {
  std::string name;
  std::string dtype;
  Shape shape;
  std::size_t offset, nbytes, header_pos;
};

}  // namespace

Archive parse_archive(const std::string& bytes) {
  HeaderReader r(bytes);
  auto magic = r.line();
  if (magic.size() != 2 || magic[0] != "MORPHARCHIVE" || magic[1] != "1")
    throw ArchiveError("bad magic; expected 'MORPHARCHIVE 1'", 0);
  Archive out;
  std::vector<Entry> entries;
  std::size_t data_bytes = 0;
  for (;;) {
    auto tok = r.line();
    if (tok[0] == "meta") {
      if (tok.size() != 3) throw ArchiveError("meta line needs key and value", r.line_start());
      out.meta[tok[1]] = tok[2];
    } else if (tok[0] == "tensor") {
      if (tok.size() < 6) throw ArchiveError("truncated tensor line", r.line_start());
      Entry e;
      e.header_pos = r.line_start();
      e.name = tok[1];
      e.dtype = tok[2];
      if (e.dtype != "f32" && e.dtype != "f64")
        throw ArchiveError("unknown dtype '" + e.dtype + "'", r.line_start());
      const auto rank = r.number<std::size_t>(tok[3]);
      if (tok.size() != 6 + rank) throw ArchiveError("tensor line rank/field count mismatch", r.line_start());
      for (std::size_t i = 0; i < rank; ++i) e.shape.push_back(r.number<std::int64_t>(tok[4 + i]));
      e.offset = r.number<std::size_t>(tok[4 + rank]);
      e.nbytes = r.number<std::size_t>(tok[5 + rank]);
      const std::size_t width = e.dtype == "f32" ? 4 : 8;
      if (e.nbytes != static_cast<std::size_t>(numel_of(e.shape)) * width)
        throw ArchiveError("byte count does not match shape for '" + e.name + "'", r.line_start());
      entries.push_back(std::move(e));
    } else if (tok[0] == "data") {
      if (tok.size() != 2) throw ArchiveError("malformed data line", r.line_start());
      data_bytes = r.number<std::size_t>(tok[1]);
      break;
    } else {
      throw ArchiveError("unknown header record '" + tok[0] + "'", r.line_start());
    }
  }
  const auto base = r.pos();
  if (bytes.size() != base + data_bytes)
    throw ArchiveError("payload is " + std::to_string(bytes.size() - std::min(bytes.size(), base)) +
                           " bytes, header declares " + std::to_string(data_bytes),
                       base);
  for (const auto& e : entries) {
    if (e.offset + e.nbytes > data_bytes)
      throw ArchiveError("tensor '" + e.name + "' extends past end of payload", e.header_pos);
    const char* src = bytes.data() + base + e.offset;
    const auto n = static_cast<std::size_t>(numel_of(e.shape));
    std::vector<Real> values(n);
    if (e.dtype == "f32") {
      for (std::size_t i = 0; i < n; ++i) {
        float f;
        std::memcpy(&f, src + 4 * i, 4);
        values[i] = static_cast<Real>(f);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double d;
        std::memcpy(&d, src + 8 * i, 8);
        values[i] = static_cast<Real>(d);
      }
    }
    out.tensors.push_back({e.name, Tensor(e.shape, std::move(values))});
  }
  return out;
}

void save_archive(const Archive& archive, const std::string& path) {
  const auto bytes = serialize_archive(archive);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

Archive load_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_archive(bytes);
}

MORPH_END_NAMESPACE
