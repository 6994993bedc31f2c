#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qled {

// flags bit 0: timestamp was jittered below zero and clamped to 0.
inline constexpr std::uint16_t kFlagClampedNegative = 0x1;

struct TimeTagRecord {
    std::uint64_t timestamp_ps = 0;
    std::uint16_t channel = 0;
    std::uint16_t flags = 0;
};

// Merged click stream of one acquisition, sorted by (timestamp, channel, flags).
struct TimeTagStream {
    std::vector<TimeTagRecord> records;
    std::uint64_t duration_ps = 0;
    std::map<std::uint16_t, std::string> channel_map;

    std::uint64_t counts_on(std::uint16_t channel) const;
};

// First channel carrying the given label, if any.
std::optional<std::uint16_t> channel_by_label(const TimeTagStream& s, const std::string& label);

// Throws IoError naming the first offending record index if timestamps decrease,
// a record's channel is missing from channel_map, or a timestamp exceeds duration.
void check_stream(const TimeTagStream& s);

}  // namespace qled
