#include "cbir/interchange.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cbir {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'M', 'B', '1'};

void put_u32(char* dst, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    dst[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  }
}

std::uint32_t get_u32(const char* src) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[i])) << (8 * i);
  }
  return v;
}

[[noreturn]] void fail(InterchangeErrc code, const std::string& what) {
  throw InterchangeError(code, what);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse_integer(std::string_view text, T& value) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc{} && ptr == last && !text.empty();
}

}  // namespace

const char* to_string(InterchangeErrc code) {
  switch (code) {
    case InterchangeErrc::bad_magic: return "bad magic";
    case InterchangeErrc::unsupported_version: return "unsupported version";
    case InterchangeErrc::unsupported_dtype: return "unsupported dtype";
    case InterchangeErrc::bad_header: return "bad header";
    case InterchangeErrc::truncated: return "truncated payload";
    case InterchangeErrc::trailing_data: return "trailing data";
    case InterchangeErrc::oversize: return "oversize declaration";
    case InterchangeErrc::non_finite: return "non-finite value";
    case InterchangeErrc::io_failure: return "i/o failure";
    case InterchangeErrc::bad_label: return "bad label";
    case InterchangeErrc::bad_row_index: return "bad row index";
    case InterchangeErrc::bad_csv: return "bad csv";
  }
  return "unknown";
}

void check_embeddings(const EmbeddingSet& set) {
  if (set.dim == 0) {
    fail(InterchangeErrc::bad_header, "embedding dim must be positive");
  }
  const auto expected = static_cast<std::uint64_t>(set.count) * set.dim;
  if (set.data.size() != expected) {
    fail(InterchangeErrc::bad_header,
         "embedding data holds " + std::to_string(set.data.size()) + " values, expected " +
             std::to_string(expected));
  }
  for (std::size_t i = 0; i < set.data.size(); ++i) {
    if (!std::isfinite(set.data[i])) {
      fail(InterchangeErrc::non_finite, "non-finite value at row " + std::to_string(i / set.dim) +
                                            ", column " + std::to_string(i % set.dim));
    }
  }
}

std::size_t write_embeddings(const EmbeddingSet& set, std::ostream& out) {
  check_embeddings(set);

  std::array<char, kEmb1HeaderSize> header{};
  std::copy(kMagic.begin(), kMagic.end(), header.begin());
  put_u32(header.data() + 4, kEmb1Version);
  put_u32(header.data() + 8, set.count);
  put_u32(header.data() + 12, set.dim);
  header[16] = static_cast<char>(kEmb1DtypeFloat32);
  out.write(header.data(), header.size());

  std::vector<char> buffer(std::size_t{4} * 4096);
  std::size_t filled = 0;
  for (float v : set.data) {
    put_u32(buffer.data() + filled, std::bit_cast<std::uint32_t>(v));
    filled += 4;
    if (filled == buffer.size()) {
      out.write(buffer.data(), static_cast<std::streamsize>(filled));
      filled = 0;
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(filled));

  if (!out) {
    fail(InterchangeErrc::io_failure, "failed writing EMB1 stream");
  }
  return kEmb1HeaderSize + set.data.size() * 4;
}

EmbeddingSet read_embeddings(std::istream& in) {
  std::array<char, kEmb1HeaderSize> header{};
  in.read(header.data(), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) {
    fail(InterchangeErrc::truncated, "EMB1 header shorter than 20 bytes");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), header.begin())) {
    fail(InterchangeErrc::bad_magic, "missing EMB1 magic");
  }
  const auto version = get_u32(header.data() + 4);
  if (version != kEmb1Version) {
    fail(InterchangeErrc::unsupported_version, "unsupported EMB1 version " + std::to_string(version));
  }
  const auto dtype = static_cast<std::uint8_t>(header[16]);
  if (dtype != kEmb1DtypeFloat32) {
    fail(InterchangeErrc::unsupported_dtype, "unsupported EMB1 dtype code " + std::to_string(dtype));
  }
  if (header[17] != 0 || header[18] != 0 || header[19] != 0) {
    fail(InterchangeErrc::bad_header, "EMB1 padding bytes are not zero");
  }

  EmbeddingSet set;
  set.count = get_u32(header.data() + 8);
  set.dim = get_u32(header.data() + 12);
  if (set.dim == 0) {
    fail(InterchangeErrc::bad_header, "EMB1 dim is zero");
  }

  const auto values = static_cast<std::uint64_t>(set.count) * set.dim;
  const auto payload = values * 4;
  if (payload > kEmb1MaxPayloadBytes ||
      values > std::numeric_limits<std::size_t>::max() / 4) {
    fail(InterchangeErrc::oversize, "EMB1 declares " + std::to_string(set.count) + "x" +
                                        std::to_string(set.dim) + " values, over the size limit");
  }

  // Grow with the data actually read so a lying header cannot force a huge allocation.
  constexpr std::size_t kChunkValues = std::size_t{1} << 20;
  std::vector<char> chunk;
  set.data.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(values, kChunkValues)));
  std::uint64_t remaining = values;
  while (remaining > 0) {
    const auto take = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kChunkValues));
    chunk.resize(take * 4);
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    if (in.gcount() != static_cast<std::streamsize>(chunk.size())) {
      const auto got_rows = (values - remaining + static_cast<std::uint64_t>(in.gcount()) / 4) / set.dim;
      fail(InterchangeErrc::truncated, "EMB1 payload truncated: header declares " +
                                           std::to_string(set.count) + " rows, found " +
                                           std::to_string(got_rows));
    }
    for (std::size_t i = 0; i < take; ++i) {
      const float v = std::bit_cast<float>(get_u32(chunk.data() + 4 * i));
      if (!std::isfinite(v)) {
        const auto flat = values - remaining + i;
        fail(InterchangeErrc::non_finite, "non-finite value at row " + std::to_string(flat / set.dim) +
                                              ", column " + std::to_string(flat % set.dim));
      }
      set.data.push_back(v);
    }
    remaining -= take;
  }

  if (in.peek() != std::char_traits<char>::eof()) {
    fail(InterchangeErrc::trailing_data, "EMB1 stream has bytes past the declared payload");
  }
  return set;
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(InterchangeErrc::io_failure, "cannot open " + path.string() + " for writing");
  }
  write_embeddings(set, out);
  out.flush();
  if (!out) {
    fail(InterchangeErrc::io_failure, "failed writing " + path.string());
  }
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(InterchangeErrc::io_failure, "cannot open " + path.string());
  }
  auto set = read_embeddings(in);
  set.source_tag = path.stem().string();
  return set;
}

EmbeddingSet read_embeddings_csv(std::istream& in) {
  EmbeddingSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;

    const auto fields = split(text, ',');
    if (set.count == 0) {
      set.dim = static_cast<std::uint32_t>(fields.size());
    } else if (fields.size() != set.dim) {
      fail(InterchangeErrc::bad_csv, "line " + std::to_string(line_no) + " has " +
                                         std::to_string(fields.size()) + " values, expected " +
                                         std::to_string(set.dim));
    }
    for (const auto& field : fields) {
      const auto token = trim(field);
      float v = 0.0f;
      const auto* last = token.data() + token.size();
      auto [ptr, ec] = std::from_chars(token.data(), last, v);
      if (ec != std::errc{} || ptr != last || token.empty()) {
        fail(InterchangeErrc::bad_csv, "line " + std::to_string(line_no) + ": '" + token +
                                           "' is not a number");
      }
      if (!std::isfinite(v)) {
        fail(InterchangeErrc::non_finite, "line " + std::to_string(line_no) + ": non-finite value");
      }
      set.data.push_back(v);
    }
    ++set.count;
  }
  if (set.count == 0) {
    fail(InterchangeErrc::bad_csv, "embedding CSV has no rows");
  }
  return set;
}

std::size_t LabelTable::class_size(int label) const {
  std::size_t n = 0;
  for (const auto& row : rows) {
    if (row.label == label) ++n;
  }
  return n;
}

LabelTable read_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    fail(InterchangeErrc::bad_csv, "labels file is empty");
  }
  if (line != "row,image_id,label") {
    fail(InterchangeErrc::bad_csv, "labels header must be 'row,image_id,label', got '" + line + "'");
  }

  LabelTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = "labels line " + std::to_string(line_no);
    if (line.back() == '\r') {
      fail(InterchangeErrc::bad_csv, where + ": CR line ending");
    }
    const auto fields = split(line, ',');
    if (fields.size() != 3) {
      fail(InterchangeErrc::bad_csv, where + ": expected 3 fields, got " + std::to_string(fields.size()));
    }

    LabelRow row;
    if (!parse_integer(fields[0], row.row_index)) {
      fail(InterchangeErrc::bad_row_index, where + ": row index '" + std::string(fields[0]) +
                                               "' is not a non-negative integer");
    }
    if (row.row_index != table.rows.size()) {
      fail(InterchangeErrc::bad_row_index,
           where + ": row index " + std::to_string(row.row_index) + " where " +
               std::to_string(table.rows.size()) + " was expected (indices must be 0..n-1 ascending)");
    }
    row.image_id = std::string(fields[1]);
    if (!parse_integer(fields[2], row.label)) {
      fail(InterchangeErrc::bad_label, where + ": label '" + std::string(fields[2]) + "' is not an integer");
    }
    if (row.label < kMinLabel || row.label > kMaxLabel) {
      fail(InterchangeErrc::bad_label,
           where + ": label " + std::to_string(row.label) + " outside BIRADS range 1-6");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_labels(const LabelTable& labels, std::ostream& out) {
  out << "row,image_id,label\n";
  for (const auto& row : labels.rows) {
    out << row.row_index << ',' << row.image_id << ',' << row.label << '\n';
  }
  if (!out) {
    fail(InterchangeErrc::io_failure, "failed writing labels");
  }
}

LabelTable load_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(InterchangeErrc::io_failure, "cannot open " + path.string());
  }
  return read_labels(in);
}

void save_labels(const LabelTable& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(InterchangeErrc::io_failure, "cannot open " + path.string() + " for writing");
  }
  write_labels(labels, out);
}

std::string AlignmentReport::message() const {
  if (ok) {
    return "aligned: " + std::to_string(embedding_count) + " embeddings, " +
           std::to_string(label_count) + " labels";
  }
  return "count mismatch: " + std::to_string(embedding_count) + " embeddings vs " +
         std::to_string(label_count) + " labels";
}

AlignmentReport validate_alignment(const EmbeddingSet& set, const LabelTable& labels) {
  AlignmentReport report;
  report.embedding_count = set.count;
  report.label_count = labels.size();
  report.ok = report.embedding_count == report.label_count;
  return report;
}

}  // namespace cbir
