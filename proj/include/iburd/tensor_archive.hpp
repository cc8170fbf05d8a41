#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace iburd {

/**
 * Weight archive layout (all integers little-endian):
 *
 *   bytes 0..3   magic "IBWT"
 *   bytes 4..7   header length L (uint32)
 *   bytes 8..8+L UTF-8 JSON header
 *   remainder    payload of float32 values
 *
 * The header is {"tensors": [{"name", "shape", "dtype": "f32", "offset",
 * "byte_length", "crc32"}, ...]}. Offsets are relative to the first payload
 * byte, ranges may not overlap, and crc32 is the zlib CRC-32 of the tensor's
 * payload bytes.
 */
struct ArchiveTensor {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> values;
};

struct ArchiveEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::uint64_t offset = 0;
    std::uint64_t byte_length = 0;
    std::uint32_t crc32 = 0;
};

inline constexpr char kArchiveMagic[4] = {'I', 'B', 'W', 'T'};

std::vector<std::uint8_t> encode_archive(std::span<const ArchiveTensor> tensors);
void write_archive(const std::filesystem::path& path, std::span<const ArchiveTensor> tensors);

/// Parses the header and checks bounds, overlap and every checksum.
std::vector<ArchiveTensor> decode_archive(std::span<const std::uint8_t> bytes);
std::vector<ArchiveTensor> read_archive(const std::filesystem::path& path);

/// Header entries of a validated archive, in file order.
std::vector<ArchiveEntry> list_archive(std::span<const std::uint8_t> bytes);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace iburd
