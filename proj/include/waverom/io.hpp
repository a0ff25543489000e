#ifndef WAVEROM_IO_HPP
#define WAVEROM_IO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "waverom/common.hpp"

namespace waverom::io {

/// Shared binary array format used by snapshots, bases, model weights:
///   magic "ROMS" | format version u16 | rows u64 | cols u64 |
///   rows*cols float64, column-major, little-endian.
void write_array(const std::filesystem::path& path, const Matrix& values);
Matrix read_array(const std::filesystem::path& path);

/// Plain-text key=value metadata, one pair per line, keys written in the
/// given order (deterministic output bytes).
using KvPairs = std::vector<std::pair<std::string, std::string>>;
void write_kv(const std::filesystem::path& path, const KvPairs& pairs);
std::map<std::string, std::string> read_kv(const std::filesystem::path& path);

std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

/// Fetch a key or throw IoError naming the missing field.
const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key, const std::string& file);

/// Minimal CSV writer; all values formatted with format_double for
/// reproducible bytes.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  void row(const std::vector<std::string>& cells);
  void row_values(const std::vector<double>& values);

 private:
  std::string path_;
  std::string buffer_;
  std::size_t columns_;
};

/// FNV-1a over a byte string; used for config hashes and artifact digests.
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(std::uint64_t h);

/// Digest of a file's raw bytes (for determinism checks).
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace waverom::io

#endif
