#include <fstream>
#include <iterator>
#include <sstream>

#include "byte_io.hpp"
#include "magicpig/errors.hpp"
#include "magicpig/lsh.hpp"

namespace magicpig {

namespace detail {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace detail

namespace {

constexpr std::string_view kIndexMagic = "MPLI";
constexpr std::uint16_t kIndexVersion = 1;

}  // namespace

std::string encode_index(const LshIndex& index) {
  const LshConfig& cfg = index.config();
  detail::ByteWriter w;
  w.put_bytes(kIndexMagic);
  w.put_u16(kIndexVersion);
  w.put_u32(static_cast<std::uint32_t>(index.size()));
  w.put_u32(static_cast<std::uint32_t>(index.dim()));
  w.put_u16(static_cast<std::uint16_t>(cfg.bits_per_table));
  w.put_u16(static_cast<std::uint16_t>(cfg.tables));
  w.put_u64(cfg.seed);
  for (unsigned t = 0; t < cfg.tables; ++t) {
    for (std::size_t b = 0; b < index.bucket_count(t); ++b) {
      const auto ids = index.bucket_ids(t, b);
      w.put_u32(index.bucket_code(t, b));
      w.put_u32(static_cast<std::uint32_t>(ids.size()));
      for (std::size_t id : ids) w.put_u32(static_cast<std::uint32_t>(id));
    }
  }
  return w.take();
}

void write_index(const LshIndex& index, const std::filesystem::path& path) {
  detail::write_file(path.string(), encode_index(index));
}

LshIndex decode_index(std::string_view bytes, const Matrix& keys, unsigned min_collisions) {
  detail::ByteReader r(bytes);
  if (r.get_bytes(4, "magic") != kIndexMagic) throw FormatError("bad magic, expected MPLI", 0);
  const std::size_t version_at = r.offset();
  const std::uint16_t version = r.get_u16("version");
  if (version != kIndexVersion) {
    throw FormatError("unsupported index version " + std::to_string(version), version_at);
  }
  const std::uint32_t n = r.get_u32("n");
  const std::size_t d_at = r.offset();
  const std::uint32_t d = r.get_u32("d");
  LshConfig cfg;
  cfg.bits_per_table = r.get_u16("K");
  cfg.tables = r.get_u16("L");
  cfg.seed = r.get_u64("seed");
  cfg.min_collisions = min_collisions;
  if (d != keys.cols()) {
    throw FormatError("index dimension " + std::to_string(d) + " does not match keys (" +
                          std::to_string(keys.cols()) + ")",
                      d_at);
  }
  try {
    cfg.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid header: ") + e.what(), d_at + 4);
  }

  struct Bucket {
    std::uint32_t code;
    std::vector<std::size_t> ids;
  };
  std::vector<std::vector<Bucket>> stored(cfg.tables);
  for (unsigned t = 0; t < cfg.tables; ++t) {
    std::size_t seen = 0;
    while (seen < n) {
      Bucket b;
      b.code = r.get_u32("bucket code");
      const std::size_t count_at = r.offset();
      const std::uint32_t count = r.get_u32("bucket count");
      if (count == 0 || seen + count > n) {
        throw FormatError("bucket count " + std::to_string(count) + " overruns table", count_at);
      }
      r.require(std::size_t{count} * 4, "bucket ids");
      for (std::uint32_t i = 0; i < count; ++i) b.ids.push_back(r.get_u32("bucket id"));
      seen += count;
      stored[t].push_back(std::move(b));
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last table", r.offset());

  std::vector<std::size_t> ids;
  for (const Bucket& b : stored.at(0)) ids.insert(ids.end(), b.ids.begin(), b.ids.end());
  std::sort(ids.begin(), ids.end());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] >= keys.rows()) {
      throw FormatError("token id " + std::to_string(ids[j]) + " exceeds key rows", r.offset());
    }
    if (j > 0 && ids[j] == ids[j - 1]) {
      throw FormatError("token id " + std::to_string(ids[j]) + " stored twice in table 0",
                        r.offset());
    }
  }

  LshIndex index = build_index(keys, ids, cfg);
  for (unsigned t = 0; t < cfg.tables; ++t) {
    bool same = index.bucket_count(t) == stored[t].size();
    for (std::size_t b = 0; same && b < stored[t].size(); ++b) {
      same = index.bucket_code(t, b) == stored[t][b].code && index.bucket_ids(t, b) == stored[t][b].ids;
    }
    if (!same) {
      throw FormatError("table " + std::to_string(t) + " disagrees with re-encoded keys",
                        r.offset());
    }
  }
  return index;
}

LshIndex read_index(const std::filesystem::path& path, const Matrix& keys,
                    unsigned min_collisions) {
  return decode_index(detail::read_file(path.string()), keys, min_collisions);
}

}  // namespace magicpig
