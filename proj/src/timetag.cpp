#include "qled/timetag.hpp"

#include <sstream>

#include "qled/errors.hpp"

namespace qled {

std::uint64_t TimeTagStream::counts_on(std::uint16_t channel) const {
    std::uint64_t n = 0;
    for (const auto& r : records)
        if (r.channel == channel) ++n;
    return n;
}

std::optional<std::uint16_t> channel_by_label(const TimeTagStream& s, const std::string& label) {
    for (const auto& [ch, name] : s.channel_map)
        if (name == label) return ch;
    return std::nullopt;
}

void check_stream(const TimeTagStream& s) {
    for (std::size_t i = 0; i < s.records.size(); ++i) {
        const auto& r = s.records[i];
        if (i > 0 && r.timestamp_ps < s.records[i - 1].timestamp_ps) {
            std::ostringstream ss;
            ss << "record " << i << ": timestamp " << r.timestamp_ps << " ps decreases from "
               << s.records[i - 1].timestamp_ps << " ps";
            throw IoError(ss.str());
        }
        if (!s.channel_map.count(r.channel)) {
            std::ostringstream ss;
            ss << "record " << i << ": channel " << r.channel << " missing from channel map";
            throw IoError(ss.str());
        }
        if (r.timestamp_ps >= s.duration_ps) {
            std::ostringstream ss;
            ss << "record " << i << ": timestamp " << r.timestamp_ps
               << " ps not below stream duration " << s.duration_ps << " ps";
            throw IoError(ss.str());
        }
    }
}

}  // namespace qled
