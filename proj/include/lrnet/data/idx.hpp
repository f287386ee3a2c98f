#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lrnet::data {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Decoded IDX container with unsigned-byte payload.
struct IdxFile {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  Bytes payload;

  bool is_images() const { return magic == kIdxImagesMagic; }
  bool is_labels() const { return magic == kIdxLabelsMagic; }
  std::size_t rank() const { return dims.size(); }
  friend bool operator==(const IdxFile&, const IdxFile&) = default;
};

/// Parses a big-endian IDX file. Accepts only the ubyte image (rank 3) and
/// label (rank 1) magics. Throws FormatError on a bad magic, a short header
/// or a payload whose length differs from the product of dims.
IdxFile parse_idx(std::span<const std::uint8_t> bytes);

/// Inverse of parse_idx.
Bytes encode_idx(const IdxFile& file);

bool is_gzip(std::span<const std::uint8_t> bytes);

/// Throws FormatError on a corrupt stream.
Bytes gzip_decompress(std::span<const std::uint8_t> bytes);

/// Deterministic gzip (no timestamp or name in the header).
Bytes gzip_compress(std::span<const std::uint8_t> bytes);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::string& path);

/// Writes through a temporary sibling and renames it into place.
/// Throws IOError.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace lrnet::data
