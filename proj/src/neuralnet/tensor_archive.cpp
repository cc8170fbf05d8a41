#include "iburd/tensor_archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "iburd/error.hpp"
#include "json.hpp"

namespace iburd {

namespace {

using ordered_json = nlohmann::ordered_json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t element_count(const std::vector<std::int64_t>& shape) {
    std::uint64_t n = 1;
    for (const auto d : shape) {
        n *= static_cast<std::uint64_t>(d);
    }
    return n;
}

struct Parsed {
    std::vector<ArchiveEntry> entries;
    std::span<const std::uint8_t> payload;
};

Parsed parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) {
        throw FormatError("not a weight archive (missing IBWT magic)");
    }
    const std::uint32_t header_len = get_u32(bytes.data() + 4);
    if (8ull + header_len > bytes.size()) {
        throw FormatError("weight archive header length " + std::to_string(header_len) + " exceeds file size");
    }
    const std::string header_text(reinterpret_cast<const char*>(bytes.data() + 8), header_len);
    ordered_json header;
    try {
        header = ordered_json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("weight archive header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("tensors") || !header["tensors"].is_array()) {
        throw FormatError("weight archive header lacks a 'tensors' array");
    }

    Parsed parsed;
    parsed.payload = bytes.subspan(8 + header_len);
    std::set<std::string> seen;
    for (const auto& t : header["tensors"]) {
        ArchiveEntry e;
        try {
            e.name = t.at("name").get<std::string>();
            e.shape = t.at("shape").get<std::vector<std::int64_t>>();
            e.offset = t.at("offset").get<std::uint64_t>();
            e.byte_length = t.at("byte_length").get<std::uint64_t>();
            e.crc32 = t.at("crc32").get<std::uint32_t>();
            if (t.at("dtype").get<std::string>() != "f32") {
                throw TensorError("tensor '" + e.name + "' has unsupported dtype '" +
                                      t.at("dtype").get<std::string>() + "'",
                                  e.name);
            }
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("malformed tensor entry in archive header: ") + ex.what());
        }
        if (!seen.insert(e.name).second) {
            throw TensorError("tensor '" + e.name + "' appears twice in the archive header", e.name);
        }
        for (const auto d : e.shape) {
            if (d < 0) {
                throw ShapeMismatchError("tensor '" + e.name + "' has a negative dimension", e.name);
            }
        }
        if (e.byte_length != 4 * element_count(e.shape)) {
            throw ShapeMismatchError("tensor '" + e.name + "' byte_length " + std::to_string(e.byte_length) +
                                         " does not match its shape",
                                     e.name);
        }
        if (e.offset > parsed.payload.size() || e.byte_length > parsed.payload.size() - e.offset) {
            throw TensorError("tensor '" + e.name + "' lies outside the payload bounds (offset " +
                                  std::to_string(e.offset) + ", length " + std::to_string(e.byte_length) +
                                  ", payload " + std::to_string(parsed.payload.size()) + " bytes)",
                              e.name);
        }
        parsed.entries.push_back(std::move(e));
    }

    std::vector<const ArchiveEntry*> by_offset;
    for (const auto& e : parsed.entries) {
        by_offset.push_back(&e);
    }
    std::sort(by_offset.begin(), by_offset.end(),
              [](const ArchiveEntry* a, const ArchiveEntry* b) { return a->offset < b->offset; });
    for (std::size_t i = 1; i < by_offset.size(); ++i) {
        if (by_offset[i - 1]->offset + by_offset[i - 1]->byte_length > by_offset[i]->offset) {
            throw TensorError("tensor '" + by_offset[i]->name + "' overlaps tensor '" + by_offset[i - 1]->name + "'",
                              by_offset[i]->name);
        }
    }

    for (const auto& e : parsed.entries) {
        const auto slice = parsed.payload.subspan(e.offset, e.byte_length);
        if (crc32_of(slice) != e.crc32) {
            throw ChecksumError("checksum mismatch for tensor '" + e.name + "'", e.name);
        }
    }
    return parsed;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open weight archive '" + path.string() + "'");
    }
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in pieces.
    std::size_t done = 0;
    while (done < bytes.size()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size() - done, 1u << 30);
        crc = crc32(crc, bytes.data() + done, static_cast<uInt>(chunk));
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_archive(std::span<const ArchiveTensor> tensors) {
    std::vector<std::uint8_t> payload;
    ordered_json list = ordered_json::array();
    for (const auto& t : tensors) {
        if (t.values.size() != element_count(t.shape)) {
            throw ShapeMismatchError("tensor '" + t.name + "' value count does not match its shape", t.name);
        }
        const std::size_t offset = payload.size();
        for (const float v : t.values) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, &v, sizeof(bits));
            put_u32(payload, bits);
        }
        const std::size_t length = payload.size() - offset;
        ordered_json entry;
        entry["name"] = t.name;
        entry["shape"] = t.shape;
        entry["dtype"] = "f32";
        entry["offset"] = offset;
        entry["byte_length"] = length;
        entry["crc32"] = crc32_of(std::span<const std::uint8_t>(payload).subspan(offset, length));
        list.push_back(std::move(entry));
    }
    ordered_json header;
    header["tensors"] = std::move(list);
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(kArchiveMagic, kArchiveMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

void write_archive(const std::filesystem::path& path, std::span<const ArchiveTensor> tensors) {
    const auto bytes = encode_archive(tensors);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

std::vector<ArchiveTensor> decode_archive(std::span<const std::uint8_t> bytes) {
    const Parsed parsed = parse(bytes);
    std::vector<ArchiveTensor> tensors;
    tensors.reserve(parsed.entries.size());
    for (const auto& e : parsed.entries) {
        ArchiveTensor t;
        t.name = e.name;
        t.shape = e.shape;
        t.values.resize(e.byte_length / 4);
        const std::uint8_t* p = parsed.payload.data() + e.offset;
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            const std::uint32_t bits = get_u32(p + 4 * i);
            std::memcpy(&t.values[i], &bits, sizeof(bits));
        }
        tensors.push_back(std::move(t));
    }
    return tensors;
}

std::vector<ArchiveTensor> read_archive(const std::filesystem::path& path) { return decode_archive(slurp(path)); }

std::vector<ArchiveEntry> list_archive(std::span<const std::uint8_t> bytes) { return parse(bytes).entries; }

}  // namespace iburd
