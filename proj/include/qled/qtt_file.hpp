#pragma once

#include <string>

#include "qled/timetag.hpp"

namespace qled {

// Binary stream container, little-endian throughout:
//   magic "QTT1" | version u16 | header_len u16 | channel_count u32
//   | record_count u64 | duration_ps u64
//   | channel_count x (channel u8, label_len u8, label bytes)
//   | record_count x (timestamp_ps u64, channel u8, flags u8, 6 zero bytes)
// header_len covers everything before the first record.

// Writes atomically (temp file + rename). Throws IoError when the stream
// cannot be represented (channel or flags beyond one byte, label too long)
// or on filesystem failure.
void write_qtt(const std::string& path, const TimeTagStream& stream);

// Reads and fully validates a file; IoError diagnostics name the byte offset
// of the first problem.
TimeTagStream read_qtt(const std::string& path);

}  // namespace qled
