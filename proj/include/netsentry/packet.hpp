#pragma once

#include <arpa/inet.h>

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <string_view>

#include "netsentry/error.hpp"

namespace netsentry {

// IPv4 or IPv6 address. IPv4 is stored in the first four bytes.
class IpAddress {
public:
  IpAddress() = default;

  static IpAddress v4(std::uint32_t host_order) {
    IpAddress a;
    a.v6_ = false;
    a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
    a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
    a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
    a.bytes_[3] = static_cast<std::uint8_t>(host_order);
    return a;
  }

  static IpAddress from_v4_bytes(const std::uint8_t *p) {
    IpAddress a;
    std::memcpy(a.bytes_.data(), p, 4);
    return a;
  }

  static IpAddress from_v6_bytes(const std::uint8_t *p) {
    IpAddress a;
    a.v6_ = true;
    std::memcpy(a.bytes_.data(), p, 16);
    return a;
  }

  static IpAddress parse(std::string_view text) {
    std::string s(text);
    IpAddress a;
    if (s.find(':') != std::string::npos) {
      a.v6_ = true;
      if (inet_pton(AF_INET6, s.c_str(), a.bytes_.data()) != 1)
        throw FormatError("invalid IPv6 address: " + s);
    } else if (inet_pton(AF_INET, s.c_str(), a.bytes_.data()) != 1) {
      throw FormatError("invalid IPv4 address: " + s);
    }
    return a;
  }

  bool is_v6() const { return v6_; }
  const std::array<std::uint8_t, 16> &bytes() const { return bytes_; }

  std::string to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    inet_ntop(v6_ ? AF_INET6 : AF_INET, bytes_.data(), buf, sizeof(buf));
    return buf;
  }

  auto operator<=>(const IpAddress &) const = default;
  bool operator==(const IpAddress &) const = default;

private:
  std::array<std::uint8_t, 16> bytes_{};
  bool v6_ = false;
};

enum class Protocol : std::uint8_t { TCP, UDP, OTHER };

inline std::uint8_t protocol_number(Protocol p) {
  switch (p) {
  case Protocol::TCP: return 6;
  case Protocol::UDP: return 17;
  default: return 0;
  }
}

inline Protocol protocol_from_number(unsigned n) {
  if (n == 6) return Protocol::TCP;
  if (n == 17) return Protocol::UDP;
  return Protocol::OTHER;
}

inline std::string_view protocol_name(Protocol p) {
  switch (p) {
  case Protocol::TCP: return "TCP";
  case Protocol::UDP: return "UDP";
  default: return "OTHER";
  }
}

// TCP flag bits, wire order.
namespace tcp {
inline constexpr std::uint8_t FIN = 0x01;
inline constexpr std::uint8_t SYN = 0x02;
inline constexpr std::uint8_t RST = 0x04;
inline constexpr std::uint8_t PSH = 0x08;
inline constexpr std::uint8_t ACK = 0x10;
inline constexpr std::uint8_t URG = 0x20;
inline constexpr std::uint8_t ECE = 0x40;
inline constexpr std::uint8_t CWE = 0x80;
} // namespace tcp

struct PacketRecord {
  std::int64_t timestamp_us = 0;
  IpAddress src_ip;
  IpAddress dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::OTHER;
  std::uint8_t tcp_flags = 0;
  std::uint32_t header_len_bytes = 0;
  std::uint32_t payload_len_bytes = 0;
  std::uint32_t tcp_window = 0;
  // Position in the originating stream; used to map flows back onto packets.
  std::uint64_t ordinal = 0;

  bool has(std::uint8_t flag) const { return (tcp_flags & flag) != 0; }

  bool operator==(const PacketRecord &) const = default;
};

} // namespace netsentry

template <> struct std::hash<netsentry::IpAddress> {
  std::size_t operator()(const netsentry::IpAddress &a) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (auto b : a.bytes()) h = (h ^ b) * 1099511628211ull;
    return static_cast<std::size_t>(h ^ (a.is_v6() ? 0x9e3779b97f4a7c15ull : 0));
  }
};
