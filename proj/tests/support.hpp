#pragma once

// Packet and flow builders shared by the test suites.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "netsentry/netsentry.hpp"

namespace testing_support {

using namespace netsentry;

inline PacketRecord tcp_pkt(std::int64_t t_us, const std::string &src, std::uint16_t sport, const std::string &dst,
                            std::uint16_t dport, std::uint8_t flags, std::uint32_t payload = 0, std::uint32_t window = 0,
                        std::uint32_t header = 40) {
  PacketRecord p;
  p.timestamp_us = t_us;
  p.src_ip = IpAddress::parse(src);
  p.dst_ip = IpAddress::parse(dst);
  p.src_port = sport;
  p.dst_port = dport;
  p.protocol = Protocol::TCP;
  p.tcp_flags = flags;
  p.payload_len_bytes = payload;
  p.tcp_window = window;
  p.header_len_bytes = header;
  return p;
}

inline PacketRecord udp_pkt(std::int64_t t_us, const std::string &src, std::uint16_t sport, const std::string &dst,
                        std::uint16_t dport, std::uint32_t payload) {
  PacketRecord p;
  p.timestamp_us = t_us;
  p.src_ip = IpAddress::parse(src);
  p.dst_ip = IpAddress::parse(dst);
  p.src_port = sport;
  p.dst_port = dport;
  p.protocol = Protocol::UDP;
  p.payload_len_bytes = payload;
  p.header_len_bytes = 28;
  return p;
}

inline void renumber(std::vector<PacketRecord> &v) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i].ordinal = i;
}

// A feature vector that only carries what sequencing looks at.
inline FeatureVector flow_at(const std::string &src, const std::string &dst, std::int64_t start_us,
                             double duration_s = 0.0, std::uint16_t sport = 40000, const std::string &label = "benign") {
  FeatureVector f;
  f.src_ip = IpAddress::parse(src);
  f.dst_ip = IpAddress::parse(dst);
  f.src_port = sport;
  f.dst_port = 80;
  f.start_us = start_us;
  f.stats[feat::Duration] = duration_s;
  f.stats[feat::ProtocolCode] = 6;
  f.label = label;
  FlowKey k{f.src_ip, f.dst_ip, f.src_port, f.dst_port, Protocol::TCP};
  f.flow_id = make_flow_id(k, start_us);
  return f;
}

// Scratch directory removed when the object goes out of scope.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string &tag) {
    path = std::filesystem::temp_directory_path() /
           ("netsentry-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string &name) const { return (path / name).string(); }
  static int &counter() {
    static int c = 0;
    return c;
  }
};

} // namespace testing_support
