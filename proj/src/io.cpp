#include "waverom/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "array format is little-endian; big-endian hosts unsupported");

namespace waverom::io {

namespace {
constexpr char kMagic[4] = {'R', 'O', 'M', 'S'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void write_array(const std::filesystem::path& path, const Matrix& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const std::uint64_t rows = static_cast<std::uint64_t>(values.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(values.cols());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  // Eigen stores column-major, matching the on-disk layout.
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[4];
  std::uint16_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a ROMS array file: " + path.string());
  if (version != kVersion)
    throw IoError("unsupported ROMS version " + std::to_string(version) + ": " + path.string());
  if (rows * cols > (1ull << 33))
    throw IoError("array too large: " + path.string());
  Matrix values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw IoError("truncated ROMS array file: " + path.string());
  return values;
}

void write_kv(const std::filesystem::path& path, const KvPairs& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& [k, v] : pairs) out << k << "=" << v << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("malformed key=value line in " + path.string() + ": " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("cannot parse number '" + s + "' for " + context);
  }
}

long parse_long(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("cannot parse integer '" + s + "' for " + context);
  }
}

const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key, const std::string& file) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError("missing field '" + key + "' in " + file);
  return it->second;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path.string()), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += header[i];
  }
  buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
  std::ofstream out(path_, std::ios::trunc);
  if (out) out << buffer_;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw IoError("csv row width mismatch: " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) buffer_ += ',';
    buffer_ += cells[i];
  }
  buffer_ += '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::uint64_t file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

}  // namespace waverom::io
