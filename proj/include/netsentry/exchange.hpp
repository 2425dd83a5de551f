#pragma once

// Header-level simulation of one TCP connection carrying request/response
// exchanges: handshake, MSS-sized data segments, a client ACK after each
// response and a FIN/FIN+ACK/ACK close. Shared by the augmentation base and
// the traffic generator so both produce packets the flow engine agrees with.

#include <cstdint>
#include <vector>

#include "netsentry/packet.hpp"

namespace netsentry {

inline constexpr std::size_t kMss = 1460;

struct Exchange {
  std::size_t request_bytes = 0;
  std::size_t response_bytes = 0;
  std::int64_t server_delay_us = 1000; // request end -> first response segment
  std::int64_t think_us = 0;           // pause before this request
};

struct ConnectionSpec {
  IpAddress client, server;
  std::uint16_t client_port = 0, server_port = 80;
  std::int64_t start_us = 0;
  std::int64_t rtt_us = 1000;
  std::int64_t segment_gap_us = 50; // spacing of back-to-back segments
  std::uint16_t client_window = 64240, server_window = 65160;
  std::vector<Exchange> exchanges;
  bool close = true; // false leaves the connection open (ends by timeout)
  bool reset = false; // client aborts with RST instead of FIN
};

namespace detail {
inline constexpr std::size_t kSynHeader = 20 + 40; // IPv4 + TCP with options
inline constexpr std::size_t kHeader = 20 + 32;    // IPv4 + TCP with timestamps
} // namespace detail

inline std::vector<PacketRecord> simulate_connection(const ConnectionSpec &c) {
  std::vector<PacketRecord> out;
  std::int64_t now = c.start_us;
  auto emit = [&](bool from_client, std::uint8_t flags, std::size_t payload, std::size_t header = detail::kHeader) {
    PacketRecord p;
    p.timestamp_us = now;
    p.src_ip = from_client ? c.client : c.server;
    p.dst_ip = from_client ? c.server : c.client;
    p.src_port = from_client ? c.client_port : c.server_port;
    p.dst_port = from_client ? c.server_port : c.client_port;
    p.protocol = Protocol::TCP;
    p.tcp_flags = flags;
    p.header_len_bytes = header;
    p.payload_len_bytes = payload;
    p.tcp_window = from_client ? c.client_window : c.server_window;
    out.push_back(p);
  };
  auto segments = [&](bool from_client, std::size_t bytes) {
    while (bytes > 0) {
      const std::size_t n = std::min(bytes, kMss);
      bytes -= n;
      emit(from_client, static_cast<std::uint8_t>(tcp::ACK | (bytes == 0 ? tcp::PSH : 0)), n);
      if (bytes > 0) now += c.segment_gap_us;
    }
  };

  emit(true, tcp::SYN, 0, detail::kSynHeader);
  now += c.rtt_us / 2;
  emit(false, tcp::SYN | tcp::ACK, 0, detail::kSynHeader);
  now += c.rtt_us / 2;
  emit(true, tcp::ACK, 0);
  for (const auto &x : c.exchanges) {
    now += x.think_us + c.segment_gap_us;
    segments(true, x.request_bytes);
    now += x.server_delay_us;
    if (x.response_bytes > 0) {
      segments(false, x.response_bytes);
      now += c.rtt_us / 2;
      emit(true, tcp::ACK, 0);
    }
  }
  if (c.reset) {
    now += c.segment_gap_us;
    emit(true, tcp::RST | tcp::ACK, 0);
  } else if (c.close) {
    now += c.segment_gap_us;
    emit(true, tcp::FIN | tcp::ACK, 0);
    now += c.rtt_us / 2;
    emit(false, tcp::FIN | tcp::ACK, 0);
    now += c.rtt_us / 2;
    emit(true, tcp::ACK, 0);
  }
  return out;
}

} // namespace netsentry
