#include "gvlad/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gvlad {

namespace {

constexpr char kMagic[4] = {'G', 'V', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

std::uint32_t get_u32(std::istream& is, std::uint64_t& offset) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is)
    throw FormatError("truncated file at byte offset " + std::to_string(offset));
  offset += 4;
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is, std::uint64_t& offset) {
  std::uint64_t lo = get_u32(is, offset);
  std::uint64_t hi = get_u32(is, offset);
  return lo | (hi << 32);
}

float get_f32(std::istream& is, std::uint64_t& offset) {
  std::uint32_t v = get_u32(is, offset);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

std::uint8_t get_u8(std::istream& is, std::uint64_t& offset) {
  char c;
  is.read(&c, 1);
  if (!is)
    throw FormatError("truncated file at byte offset " + std::to_string(offset));
  offset += 1;
  return static_cast<std::uint8_t>(c);
}

void check_dims(int dim, const std::vector<ExampleRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].descriptor.size() != dim)
      throw DimMismatch("record " + std::to_string(i) + " has dim " +
                        std::to_string(records[i].descriptor.size()) +
                        ", dataset declares " + std::to_string(dim));
  }
}

void write_binary(std::ostream& os, int dim,
                  const std::vector<ExampleRecord>& records) {
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(dim));
  put_u64(os, records.size());
  for (const auto& r : records) {
    put_u32(os, r.identity);
    put_u32(os, r.media_id);
    os.put(static_cast<char>(r.source_kind));
    os.put(static_cast<char>(r.quality_tag));
    for (int j = 0; j < dim; ++j) put_f32(os, static_cast<float>(r.descriptor[j]));
  }
}

Dataset read_binary(std::istream& is) {
  std::uint64_t offset = 4;  // magic already consumed
  std::uint32_t version = get_u32(is, offset);
  if (version != kVersion)
    throw FormatError("unsupported GVD version " + std::to_string(version));
  std::uint32_t dim = get_u32(is, offset);
  std::uint64_t n = get_u64(is, offset);

  Dataset ds;
  ds.dim = static_cast<int>(dim);
  ds.records.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    ExampleRecord r;
    r.identity = get_u32(is, offset);
    r.media_id = get_u32(is, offset);
    std::uint8_t sk = get_u8(is, offset);
    std::uint8_t qt = get_u8(is, offset);
    if (sk > 1)
      throw FormatError("bad source_kind at byte offset " + std::to_string(offset - 2));
    if (qt > 1)
      throw FormatError("bad quality_tag at byte offset " + std::to_string(offset - 1));
    r.source_kind = static_cast<SourceKind>(sk);
    r.quality_tag = static_cast<QualityTag>(qt);
    r.descriptor.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) r.descriptor[j] = get_f32(is, offset);
    ds.records.push_back(std::move(r));
  }
  char extra;
  if (is.read(&extra, 1))
    throw FormatError("trailing bytes at offset " + std::to_string(offset));
  return ds;
}

void write_jsonl(std::ostream& os, int dim,
                 const std::vector<ExampleRecord>& records) {
  nlohmann::json header = {{"format", "gvd-jsonl"}, {"d_f", dim}};
  os << header.dump() << '\n';
  for (const auto& r : records) {
    nlohmann::json line;
    line["identity"] = r.identity;
    line["media_id"] = r.media_id;
    line["source_kind"] = static_cast<int>(r.source_kind);
    line["quality_tag"] = static_cast<int>(r.quality_tag);
    auto& arr = line["descriptor"] = nlohmann::json::array();
    for (int j = 0; j < dim; ++j) arr.push_back(r.descriptor[j]);
    os << line.dump() << '\n';
  }
}

Dataset read_jsonl(std::istream& is, const std::string& first_line) {
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(first_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("line 1: ") + e.what());
  }
  if (header.value("format", "") != "gvd-jsonl" || !header.contains("d_f"))
    throw FormatError("line 1: missing gvd-jsonl header");

  Dataset ds;
  ds.dim = header["d_f"].get<int>();
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    ExampleRecord r;
    try {
      r.identity = j.at("identity").get<std::uint32_t>();
      r.media_id = j.at("media_id").get<std::uint32_t>();
      r.source_kind = static_cast<SourceKind>(j.at("source_kind").get<int>());
      r.quality_tag = static_cast<QualityTag>(j.at("quality_tag").get<int>());
      const auto& arr = j.at("descriptor");
      r.descriptor.resize(arr.size());
      for (std::size_t k = 0; k < arr.size(); ++k) r.descriptor[k] = arr[k].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (r.descriptor.size() != ds.dim)
      throw DimMismatch("line " + std::to_string(lineno) + ": descriptor has " +
                        std::to_string(r.descriptor.size()) + " values, header declares " +
                        std::to_string(ds.dim));
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace

void write_dataset(const std::string& path, int dim,
                   const std::vector<ExampleRecord>& records,
                   DatasetFormat format) {
  check_dims(dim, records);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  if (format == DatasetFormat::Binary)
    write_binary(os, dim, records);
  else
    write_jsonl(os, dim, records);
  if (!os) throw FormatError("write failure on " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is && std::memcmp(magic, kMagic, 4) == 0) return read_binary(is);

  // not binary: treat as jsonl, the first line must be the header
  is.clear();
  is.seekg(0);
  std::string first_line;
  if (!std::getline(is, first_line))
    throw FormatError("empty or unreadable file " + path);
  return read_jsonl(is, first_line);
}

}  // namespace gvlad
