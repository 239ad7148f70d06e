#include "qom/stream_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace qom {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_streams_csv(std::ostream& out, const std::vector<TimestampStream>& streams,
                       const StreamFileInfo& info) {
  out << "# qomsim timestamp streams\n";
  if (info.scenario_hash) out << "# scenario_hash=" << *info.scenario_hash << "\n";
  std::optional<double> duration = info.duration_s;
  if (!duration && !streams.empty()) duration = streams.front().duration_s;
  if (duration) out << "# duration_s=" << format_double(*duration) << "\n";
  out << "channel_id,t_s\n";
  for (const auto& s : streams) {
    for (double t : s.t_s) out << s.channel_id << ',' << format_double(t) << '\n';
  }
}

std::string streams_csv(const std::vector<TimestampStream>& streams, const StreamFileInfo& info) {
  std::ostringstream os;
  write_streams_csv(os, streams, info);
  return os.str();
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw std::runtime_error("line " + std::to_string(line) + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

StreamFile read_streams_csv(std::istream& in, std::optional<double> duration_override) {
  StreamFile file;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  double latest = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(line.substr(1, eq - 1));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "scenario_hash") file.info.scenario_hash = value;
      if (key == "duration_s") file.info.duration_s = parse_number(value, line_no);
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected 'channel_id,t_s'");
    }
    std::string channel = trim(line.substr(0, comma));
    std::string value = trim(line.substr(comma + 1));
    if (channel == "channel_id") continue;
    const double t = parse_number(value, line_no);
    auto [it, inserted] = index.try_emplace(channel, file.streams.size());
    if (inserted) file.streams.push_back({channel, {}, 0.0});
    file.streams[it->second].t_s.push_back(t);
    latest = std::max(latest, t);
  }
  const double duration = file.info.duration_s.value_or(duration_override.value_or(latest));
  for (auto& s : file.streams) {
    std::sort(s.t_s.begin(), s.t_s.end());
    s.t_s.erase(std::unique(s.t_s.begin(), s.t_s.end()), s.t_s.end());
    s.duration_s = duration;
  }
  return file;
}

StreamFile read_streams_csv(const std::filesystem::path& path, std::optional<double> duration_override) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_streams_csv(in, duration_override);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string stream_binary(const TimestampStream& stream) {
  std::string bytes(stream.t_s.size() * 8, '\0');
  for (std::size_t k = 0; k < stream.t_s.size(); ++k) {
    auto bits = std::bit_cast<std::uint64_t>(stream.t_s[k]);
    for (int b = 0; b < 8; ++b) {
      bytes[8 * k + b] = static_cast<char>(bits & 0xffu);
      bits >>= 8;
    }
  }
  return bytes;
}

void write_stream_binary(const std::filesystem::path& path, const TimestampStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = stream_binary(stream);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TimestampStream parse_stream_binary(const std::string& bytes, std::string channel_id,
                                    std::optional<double> duration_s) {
  if (bytes.size() % 8 != 0) {
    throw std::runtime_error("binary stream size " + std::to_string(bytes.size()) +
                             " is not a multiple of 8 bytes");
  }
  TimestampStream s{std::move(channel_id), std::vector<double>(bytes.size() / 8), 0.0};
  for (std::size_t k = 0; k < s.t_s.size(); ++k) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(bytes[8 * k + b]);
    s.t_s[k] = std::bit_cast<double>(bits);
  }
  std::sort(s.t_s.begin(), s.t_s.end());
  s.duration_s = duration_s.value_or(s.t_s.empty() ? 0.0 : s.t_s.back());
  return s;
}

TimestampStream read_stream_binary(const std::filesystem::path& path, std::string channel_id,
                                   std::optional<double> duration_s) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_stream_binary(os.str(), std::move(channel_id), duration_s);
}

}  // namespace qom
