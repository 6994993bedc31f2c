#include "qled/qtt_file.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "qled/errors.hpp"

namespace qled {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'T', '1'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kFixedHeaderBytes = 28;
constexpr std::size_t kRecordBytes = 16;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

[[noreturn]] void corrupt(const std::string& path, std::size_t offset, const std::string& what) {
    std::ostringstream ss;
    ss << path << ": " << what << " at byte offset " << offset;
    throw IoError(ss.str());
}

}  // namespace

void write_qtt(const std::string& path, const TimeTagStream& stream) {
    std::size_t map_bytes = 0;
    for (const auto& [ch, label] : stream.channel_map) {
        if (ch > 0xFF)
            throw IoError(path + ": channel " + std::to_string(ch) +
                          " does not fit the one-byte record field");
        if (label.size() > 0xFF)
            throw IoError(path + ": channel label longer than 255 bytes");
        map_bytes += 2 + label.size();
    }
    const std::size_t header_len = kFixedHeaderBytes + map_bytes;
    if (header_len > 0xFFFF) throw IoError(path + ": channel map too large for the header");

    std::string buf;
    buf.reserve(header_len + kRecordBytes * stream.records.size());
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    put_u16(buf, static_cast<std::uint16_t>(header_len));
    put_u32(buf, static_cast<std::uint32_t>(stream.channel_map.size()));
    put_u64(buf, stream.records.size());
    put_u64(buf, stream.duration_ps);
    for (const auto& [ch, label] : stream.channel_map) {
        buf.push_back(static_cast<char>(ch));
        buf.push_back(static_cast<char>(label.size()));
        buf.append(label);
    }
    for (const auto& r : stream.records) {
        if (r.channel > 0xFF)
            throw IoError(path + ": record channel " + std::to_string(r.channel) +
                          " does not fit the one-byte record field");
        if (r.flags > 0xFF)
            throw IoError(path + ": record flags do not fit one byte");
        put_u64(buf, r.timestamp_ps);
        buf.push_back(static_cast<char>(r.channel));
        buf.push_back(static_cast<char>(r.flags));
        buf.append(6, '\0');
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) {
            std::remove(tmp.c_str());
            throw IoError("write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

TimeTagStream read_qtt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());

    if (data.size() < kFixedHeaderBytes) corrupt(path, data.size(), "truncated header");
    if (!std::equal(kMagic, kMagic + 4, data.data())) corrupt(path, 0, "bad magic bytes");
    const std::uint16_t version = get_u16(p + 4);
    if (version != kVersion)
        corrupt(path, 4, "unsupported version " + std::to_string(version));
    const std::uint16_t header_len = get_u16(p + 6);
    const std::uint32_t channel_count = get_u32(p + 8);
    const std::uint64_t record_count = get_u64(p + 12);
    const std::uint64_t duration_ps = get_u64(p + 20);
    if (header_len < kFixedHeaderBytes) corrupt(path, 6, "header length too small");
    if (data.size() < header_len) corrupt(path, data.size(), "truncated channel map");

    TimeTagStream stream;
    stream.duration_ps = duration_ps;
    std::size_t off = kFixedHeaderBytes;
    for (std::uint32_t i = 0; i < channel_count; ++i) {
        if (off + 2 > header_len) corrupt(path, off, "channel map overruns header");
        const std::uint16_t ch = p[off];
        const std::size_t label_len = p[off + 1];
        if (off + 2 + label_len > header_len)
            corrupt(path, off + 2, "channel label overruns header");
        if (stream.channel_map.count(ch)) corrupt(path, off, "duplicate channel in map");
        stream.channel_map[ch] = data.substr(off + 2, label_len);
        off += 2 + label_len;
    }
    if (off != header_len) corrupt(path, off, "channel map shorter than header length");

    const std::size_t body = data.size() - header_len;
    if (body != record_count * kRecordBytes) {
        std::ostringstream what;
        what << "body holds " << body << " bytes but the header promises " << record_count
             << " records (" << record_count * kRecordBytes << " bytes)";
        corrupt(path, header_len, what.str());
    }
    stream.records.reserve(record_count);
    std::uint64_t prev = 0;
    for (std::uint64_t i = 0; i < record_count; ++i) {
        const std::size_t r = header_len + i * kRecordBytes;
        TimeTagRecord rec;
        rec.timestamp_ps = get_u64(p + r);
        rec.channel = p[r + 8];
        rec.flags = p[r + 9];
        for (int z = 10; z < 16; ++z)
            if (p[r + z] != 0) corrupt(path, r + z, "reserved record bytes must be zero");
        if (i > 0 && rec.timestamp_ps < prev)
            corrupt(path, r, "timestamps decrease at record " + std::to_string(i));
        prev = rec.timestamp_ps;
        stream.records.push_back(rec);
    }

    check_stream(stream);
    return stream;
}

}  // namespace qled
