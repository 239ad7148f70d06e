#pragma once

#include "qom/detection.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qom {

/// Metadata carried in '#' comment lines of stream CSV files.
struct StreamFileInfo {
  std::optional<std::string> scenario_hash;
  std::optional<double> duration_s;
};

/// CSV with a `channel_id,t_s` header. Comment lines ("# key=value") carry
/// the scenario hash and duration. Times use shortest round-trip formatting.
void write_streams_csv(std::ostream& out, const std::vector<TimestampStream>& streams,
                       const StreamFileInfo& info = {});
std::string streams_csv(const std::vector<TimestampStream>& streams, const StreamFileInfo& info = {});

struct StreamFile {
  std::vector<TimestampStream> streams;
  StreamFileInfo info;
};

/// Reads a streams CSV. The header line and comments are optional; rows are
/// grouped by channel in order of first appearance and sorted. Duration comes
/// from the file metadata, then `duration_override`, then the latest timestamp.
/// Throws std::runtime_error with the line number on malformed rows.
StreamFile read_streams_csv(std::istream& in, std::optional<double> duration_override = {});
StreamFile read_streams_csv(const std::filesystem::path& path, std::optional<double> duration_override = {});

/// Raw little-endian IEEE-754 binary64 seconds, no header.
std::string stream_binary(const TimestampStream& stream);
void write_stream_binary(const std::filesystem::path& path, const TimestampStream& stream);
TimestampStream read_stream_binary(const std::filesystem::path& path, std::string channel_id,
                                   std::optional<double> duration_s = {});
TimestampStream parse_stream_binary(const std::string& bytes, std::string channel_id,
                                    std::optional<double> duration_s = {});

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

}  // namespace qom
