#pragma once

// Capture ingestion: classic pcap and pcapng readers, a header-only pcap
// writer, and the line-oriented packet CSV used between pipeline stages.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "netsentry/error.hpp"
#include "netsentry/packet.hpp"
#include "netsentry/text.hpp"

namespace netsentry {

using PacketFilter = std::function<bool(const PacketRecord &)>;

struct CaptureStats {
  std::uint64_t frames = 0;    // every frame seen in the file
  std::uint64_t skipped = 0;   // non-IP frames, non-first fragments
  std::uint64_t malformed = 0; // truncated or inconsistent headers
  std::uint64_t filtered = 0;  // rejected by the caller's filter
};

namespace detail {

inline std::uint16_t be16(const std::uint8_t *p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}
inline std::uint32_t be32(const std::uint8_t *p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

enum class Decode { Ok, Skip, Malformed };

// Decodes the IP datagram starting at `p` (length `len`) into `out`.
inline Decode decode_ip(const std::uint8_t *p, std::size_t len, PacketRecord &out) {
  if (len < 1) return Decode::Malformed;
  const unsigned version = p[0] >> 4;
  std::size_t ip_hl = 0;
  std::size_t total = 0;
  unsigned proto = 0;
  if (version == 4) {
    if (len < 20) return Decode::Malformed;
    ip_hl = std::size_t(p[0] & 0x0f) * 4;
    total = be16(p + 2);
    if (ip_hl < 20 || total < ip_hl || len < ip_hl) return Decode::Malformed;
    if ((be16(p + 6) & 0x1fff) != 0) return Decode::Skip; // non-first fragment
    proto = p[9];
    out.src_ip = IpAddress::from_v4_bytes(p + 12);
    out.dst_ip = IpAddress::from_v4_bytes(p + 16);
  } else if (version == 6) {
    if (len < 40) return Decode::Malformed;
    ip_hl = 40;
    total = 40 + std::size_t(be16(p + 4));
    proto = p[6];
    out.src_ip = IpAddress::from_v6_bytes(p + 8);
    out.dst_ip = IpAddress::from_v6_bytes(p + 24);
  } else {
    return Decode::Malformed;
  }

  out.protocol = protocol_from_number(proto);
  std::size_t l4_hl = 0;
  const std::uint8_t *l4 = p + ip_hl;
  const std::size_t l4_avail = len - ip_hl;
  if (out.protocol == Protocol::TCP) {
    if (l4_avail < 20) return Decode::Malformed;
    out.src_port = be16(l4);
    out.dst_port = be16(l4 + 2);
    l4_hl = std::size_t(l4[12] >> 4) * 4;
    if (l4_hl < 20) return Decode::Malformed;
    out.tcp_flags = l4[13];
    out.tcp_window = be16(l4 + 14);
  } else if (out.protocol == Protocol::UDP) {
    if (l4_avail < 8) return Decode::Malformed;
    out.src_port = be16(l4);
    out.dst_port = be16(l4 + 2);
    l4_hl = 8;
  }
  if (total < ip_hl + l4_hl) return Decode::Malformed;
  out.header_len_bytes = static_cast<std::uint32_t>(ip_hl + l4_hl);
  out.payload_len_bytes = static_cast<std::uint32_t>(total - ip_hl - l4_hl);
  return Decode::Ok;
}

// Strips the link layer for the given DLT and decodes the IP payload.
inline Decode decode_frame(std::uint32_t linktype, const std::uint8_t *p, std::size_t len,
                           PacketRecord &out) {
  switch (linktype) {
  case 1: { // Ethernet
    std::size_t off = 12;
    if (len < off + 2) return Decode::Malformed;
    std::uint16_t type = be16(p + off);
    off += 2;
    while (type == 0x8100 || type == 0x88a8) {
      if (len < off + 4) return Decode::Malformed;
      type = be16(p + off + 2);
      off += 4;
    }
    if (type != 0x0800 && type != 0x86dd) return Decode::Skip;
    return decode_ip(p + off, len - off, out);
  }
  case 113: { // Linux cooked v1
    if (len < 16) return Decode::Malformed;
    const std::uint16_t type = be16(p + 14);
    if (type != 0x0800 && type != 0x86dd) return Decode::Skip;
    return decode_ip(p + 16, len - 16, out);
  }
  case 276: { // Linux cooked v2
    if (len < 20) return Decode::Malformed;
    const std::uint16_t type = be16(p);
    if (type != 0x0800 && type != 0x86dd) return Decode::Skip;
    return decode_ip(p + 20, len - 20, out);
  }
  case 0: { // BSD loopback, host-order family
    if (len < 4) return Decode::Malformed;
    if (len < 5) return Decode::Skip;
    const unsigned v = p[4] >> 4;
    if (v != 4 && v != 6) return Decode::Skip;
    return decode_ip(p + 4, len - 4, out);
  }
  case 12:
  case 101:
  case 228:
  case 229: // raw IP
    if (len < 1) return Decode::Malformed;
    if ((p[0] >> 4) != 4 && (p[0] >> 4) != 6) return Decode::Skip;
    return decode_ip(p, len, out);
  default:
    return Decode::Skip;
  }
}

class ByteSource {
public:
  explicit ByteSource(std::istream &in) : in_(in) {}

  bool read(void *dst, std::size_t n) {
    in_.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount()) == n;
  }

private:
  std::istream &in_;
};

inline std::uint32_t swap32(std::uint32_t v) {
  return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}
inline std::uint16_t swap16(std::uint16_t v) {
  return static_cast<std::uint16_t>((v << 8) | (v >> 8));
}

} // namespace detail

// Streaming reader over a pcap or pcapng file. Packets are produced in file
// order; non-IP frames and malformed packets are counted and skipped.
class CaptureReader {
public:
  explicit CaptureReader(const std::string &path, PacketFilter filter = {})
      : file_(path, std::ios::binary), src_(file_), filter_(std::move(filter)) {
    if (!file_) throw FormatError("cannot open capture: " + path);
    std::uint32_t magic = 0;
    if (!src_.read(&magic, 4)) {
      empty_ = true; // zero-length file
      return;
    }
    if (magic == 0x0A0D0D0A) {
      ng_ = true;
      read_section_header_rest();
    } else {
      read_pcap_header(magic);
    }
  }

  std::optional<PacketRecord> next() {
    if (empty_) return std::nullopt;
    std::vector<std::uint8_t> frame;
    std::int64_t ts = 0;
    std::uint32_t linktype = 0;
    while (true) {
      const bool got = ng_ ? next_ng_frame(frame, ts, linktype) : next_pcap_frame(frame, ts, linktype);
      if (!got) return std::nullopt;
      ++stats_.frames;
      PacketRecord rec;
      switch (detail::decode_frame(linktype, frame.data(), frame.size(), rec)) {
      case detail::Decode::Skip: ++stats_.skipped; continue;
      case detail::Decode::Malformed: ++stats_.malformed; continue;
      case detail::Decode::Ok: break;
      }
      rec.timestamp_us = ts;
      rec.ordinal = ordinal_++;
      if (filter_ && !filter_(rec)) {
        ++stats_.filtered;
        continue;
      }
      return rec;
    }
  }

  const CaptureStats &stats() const { return stats_; }

private:
  struct Interface {
    std::uint32_t linktype = 1;
    // timestamp units per second
    std::uint64_t units = 1000000;
  };

  std::uint32_t fix32(std::uint32_t v) const { return swapped_ ? detail::swap32(v) : v; }
  std::uint16_t fix16(std::uint16_t v) const { return swapped_ ? detail::swap16(v) : v; }

  void read_pcap_header(std::uint32_t magic) {
    switch (magic) {
    case 0xa1b2c3d4: break;
    case 0xd4c3b2a1: swapped_ = true; break;
    case 0xa1b23c4d: nanos_ = true; break;
    case 0x4d3cb2a1: swapped_ = nanos_ = true; break;
    default: throw FormatError("not a pcap/pcapng capture (bad magic)");
    }
    std::uint8_t rest[20];
    if (!src_.read(rest, sizeof(rest))) throw FormatError("truncated pcap global header");
    std::uint32_t lt;
    std::memcpy(&lt, rest + 16, 4);
    pcap_linktype_ = fix32(lt) & 0x0fffffff;
  }

  bool next_pcap_frame(std::vector<std::uint8_t> &frame, std::int64_t &ts, std::uint32_t &linktype) {
    std::uint32_t hdr[4];
    if (!src_.read(hdr, sizeof(hdr))) return false;
    const std::uint32_t sec = fix32(hdr[0]);
    const std::uint32_t frac = fix32(hdr[1]);
    const std::uint32_t incl = fix32(hdr[2]);
    if (incl > (1u << 26)) throw FormatError("corrupt pcap record length");
    frame.resize(incl);
    if (!src_.read(frame.data(), incl)) {
      ++stats_.malformed; // truncated final record
      return false;
    }
    ts = std::int64_t(sec) * 1000000 + (nanos_ ? frac / 1000 : frac);
    linktype = pcap_linktype_;
    return true;
  }

  void read_section_header_rest() {
    std::uint32_t len_raw = 0, bom = 0;
    if (!src_.read(&len_raw, 4) || !src_.read(&bom, 4)) throw FormatError("truncated pcapng section header");
    if (bom == 0x1A2B3C4D) swapped_ = false;
    else if (bom == 0x4D3C2B1A) swapped_ = true;
    else throw FormatError("bad pcapng byte-order magic");
    const std::uint32_t len = fix32(len_raw);
    if (len < 28 || len % 4 != 0) throw FormatError("bad pcapng section header length");
    std::vector<std::uint8_t> skip(len - 12);
    if (!src_.read(skip.data(), skip.size())) throw FormatError("truncated pcapng section header");
    interfaces_.clear();
  }

  void parse_interface(const std::vector<std::uint8_t> &body) {
    if (body.size() < 8) throw FormatError("short pcapng interface block");
    Interface itf;
    std::uint16_t lt;
    std::memcpy(&lt, body.data(), 2);
    itf.linktype = fix16(lt);
    std::size_t off = 8;
    while (off + 4 <= body.size()) {
      std::uint16_t code, olen;
      std::memcpy(&code, body.data() + off, 2);
      std::memcpy(&olen, body.data() + off + 2, 2);
      code = fix16(code);
      olen = fix16(olen);
      off += 4;
      if (code == 0 || off + olen > body.size()) break;
      if (code == 9 && olen >= 1) { // if_tsresol
        const std::uint8_t r = body[off];
        std::uint64_t units = 1;
        if (r & 0x80)
          for (int i = 0; i < (r & 0x7f) && i < 63; ++i) units *= 2;
        else
          for (int i = 0; i < r && i < 19; ++i) units *= 10;
        itf.units = units;
      }
      off += (olen + 3u) & ~3u;
    }
    interfaces_.push_back(itf);
  }

  std::int64_t to_us(std::uint64_t raw, const Interface &itf) const {
    if (itf.units == 1000000) return static_cast<std::int64_t>(raw);
    const std::uint64_t sec = raw / itf.units;
    const std::uint64_t rem = raw % itf.units;
    return static_cast<std::int64_t>(sec * 1000000 +
                                     static_cast<std::uint64_t>((static_cast<long double>(rem) * 1e6L) / itf.units));
  }

  bool next_ng_frame(std::vector<std::uint8_t> &frame, std::int64_t &ts, std::uint32_t &linktype) {
    while (true) {
      std::uint32_t head[2];
      if (!src_.read(head, sizeof(head))) return false;
      if (head[0] == 0x0A0D0D0A) { // new section; byte order may change
        read_section_header_rest();
        continue;
      }
      const std::uint32_t type = fix32(head[0]);
      const std::uint32_t len = fix32(head[1]);
      if (len < 12 || len % 4 != 0 || len > (1u << 26)) throw FormatError("corrupt pcapng block length");
      std::vector<std::uint8_t> body(len - 12);
      std::uint32_t trailer;
      if (!src_.read(body.data(), body.size()) || !src_.read(&trailer, 4)) {
        ++stats_.malformed;
        return false;
      }
      auto u32 = [&](std::size_t off) {
        std::uint32_t v;
        std::memcpy(&v, body.data() + off, 4);
        return fix32(v);
      };
      if (type == 1) {
        parse_interface(body);
      } else if (type == 6 || type == 2) { // enhanced / obsolete packet block
        if (body.size() < 20) {
          ++stats_.malformed;
          continue;
        }
        std::uint32_t iface;
        if (type == 6) {
          iface = u32(0);
        } else {
          std::uint16_t i16;
          std::memcpy(&i16, body.data(), 2);
          iface = fix16(i16);
        }
        const std::uint64_t raw = (std::uint64_t(u32(4)) << 32) | u32(8);
        const std::uint32_t caplen = u32(12);
        if (iface >= interfaces_.size() || 20 + std::size_t(caplen) > body.size()) {
          ++stats_.malformed;
          continue;
        }
        frame.assign(body.begin() + 20, body.begin() + 20 + caplen);
        ts = to_us(raw, interfaces_[iface]);
        linktype = interfaces_[iface].linktype;
        return true;
      } else if (type == 3) {
        // simple packet block carries no timestamp
        ++stats_.frames;
        ++stats_.skipped;
      }
    }
  }

  std::ifstream file_;
  detail::ByteSource src_;
  PacketFilter filter_;
  CaptureStats stats_;
  bool empty_ = false;
  bool ng_ = false;
  bool swapped_ = false;
  bool nanos_ = false;
  std::uint32_t pcap_linktype_ = 1;
  std::vector<Interface> interfaces_;
  std::uint64_t ordinal_ = 0;
};

struct Capture {
  std::vector<PacketRecord> packets;
  CaptureStats stats;
};

inline Capture parse_capture(const std::string &path, PacketFilter filter = {}) {
  CaptureReader reader(path, std::move(filter));
  Capture out;
  while (auto p = reader.next()) out.packets.push_back(*p);
  out.stats = reader.stats();
  return out;
}

// Writes records as a classic microsecond pcap with Ethernet framing. Only
// headers are stored (incl_len < orig_len); payload length travels in the IP
// total-length field.
inline void write_pcap(const std::string &path, const std::vector<PacketRecord> &packets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write capture: " + path);
  auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char *>(&v), 4); };
  auto put16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char *>(&v), 2); };
  put32(0xa1b2c3d4);
  put16(2);
  put16(4);
  put32(0);
  put32(0);
  put32(65535);
  put32(1);

  std::vector<std::uint8_t> f;
  for (const auto &p : packets) {
    f.assign(14, 0);
    f[0] = 0x02;
    f[6] = 0x02;
    f[5] = 0x01;
    f[11] = 0x02;
    const bool v6 = p.src_ip.is_v6();
    f[12] = v6 ? 0x86 : 0x08;
    f[13] = v6 ? 0xdd : 0x00;
    const std::size_t ip_hl = v6 ? 40 : 20;
    std::size_t l4_hl = 0;
    if (p.protocol == Protocol::TCP)
      l4_hl = p.header_len_bytes >= ip_hl + 20 ? std::min<std::size_t>(60, (p.header_len_bytes - ip_hl) & ~std::size_t(3)) : 20;
    else if (p.protocol == Protocol::UDP)
      l4_hl = 8;
    const unsigned proto = p.protocol == Protocol::OTHER ? 1 : protocol_number(p.protocol);
    if (!v6) {
      const std::size_t total = 20 + l4_hl + p.payload_len_bytes;
      std::uint8_t ip[20] = {0x45, 0, std::uint8_t(total >> 8), std::uint8_t(total), 0, 0, 0x40, 0, 64, std::uint8_t(proto)};
      std::memcpy(ip + 12, p.src_ip.bytes().data(), 4);
      std::memcpy(ip + 16, p.dst_ip.bytes().data(), 4);
      f.insert(f.end(), ip, ip + 20);
    } else {
      const std::size_t plen = l4_hl + p.payload_len_bytes;
      std::uint8_t ip[40] = {0x60, 0, 0, 0, std::uint8_t(plen >> 8), std::uint8_t(plen), std::uint8_t(proto), 64};
      std::memcpy(ip + 8, p.src_ip.bytes().data(), 16);
      std::memcpy(ip + 24, p.dst_ip.bytes().data(), 16);
      f.insert(f.end(), ip, ip + 40);
    }
    if (p.protocol == Protocol::TCP) {
      std::vector<std::uint8_t> t(l4_hl, 0x01); // NOP option padding
      t[0] = std::uint8_t(p.src_port >> 8);
      t[1] = std::uint8_t(p.src_port);
      t[2] = std::uint8_t(p.dst_port >> 8);
      t[3] = std::uint8_t(p.dst_port);
      for (int i = 4; i < 12; ++i) t[i] = 0;
      t[12] = std::uint8_t((l4_hl / 4) << 4);
      t[13] = p.tcp_flags;
      t[14] = std::uint8_t(p.tcp_window >> 8);
      t[15] = std::uint8_t(p.tcp_window);
      for (int i = 16; i < 20; ++i) t[i] = 0;
      f.insert(f.end(), t.begin(), t.end());
    } else if (p.protocol == Protocol::UDP) {
      const std::size_t ulen = 8 + p.payload_len_bytes;
      std::uint8_t u[8] = {std::uint8_t(p.src_port >> 8), std::uint8_t(p.src_port), std::uint8_t(p.dst_port >> 8),
                           std::uint8_t(p.dst_port), std::uint8_t(ulen >> 8), std::uint8_t(ulen), 0, 0};
      f.insert(f.end(), u, u + 8);
    }
    put32(static_cast<std::uint32_t>(p.timestamp_us / 1000000));
    put32(static_cast<std::uint32_t>(p.timestamp_us % 1000000));
    put32(static_cast<std::uint32_t>(f.size()));
    put32(static_cast<std::uint32_t>(f.size() + p.payload_len_bytes));
    out.write(reinterpret_cast<const char *>(f.data()), static_cast<std::streamsize>(f.size()));
  }
}

// ---- packet CSV -----------------------------------------------------------

inline constexpr const char *kPacketCsvHeader =
    "timestamp_us,src_ip,dst_ip,src_port,dst_port,protocol,tcp_flags,header_len,payload_len,tcp_window";

inline void write_packet_csv(std::ostream &out, const std::vector<PacketRecord> &packets) {
  out << kPacketCsvHeader << '\n';
  for (const auto &p : packets) {
    out << p.timestamp_us << ',' << p.src_ip.to_string() << ',' << p.dst_ip.to_string() << ',' << p.src_port << ','
        << p.dst_port << ',' << protocol_name(p.protocol) << ',' << unsigned(p.tcp_flags) << ',' << p.header_len_bytes
        << ',' << p.payload_len_bytes << ',' << p.tcp_window << '\n';
  }
}

inline void write_packet_csv(const std::string &path, const std::vector<PacketRecord> &packets) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write packet CSV: " + path);
  write_packet_csv(out, packets);
}

inline std::vector<PacketRecord> read_packet_csv(std::istream &in) {
  std::vector<PacketRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (text::trim(line) != kPacketCsvHeader) throw FormatError("packet CSV: unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 10) throw FormatError("packet CSV line " + std::to_string(lineno) + ": expected 10 fields");
    PacketRecord p;
    p.timestamp_us = text::to_int(f[0]);
    p.src_ip = IpAddress::parse(f[1]);
    p.dst_ip = IpAddress::parse(f[2]);
    p.src_port = static_cast<std::uint16_t>(text::to_int(f[3]));
    p.dst_port = static_cast<std::uint16_t>(text::to_int(f[4]));
    p.protocol = f[5] == "TCP" ? Protocol::TCP : f[5] == "UDP" ? Protocol::UDP : Protocol::OTHER;
    p.tcp_flags = static_cast<std::uint8_t>(text::to_int(f[6]));
    p.header_len_bytes = static_cast<std::uint32_t>(text::to_int(f[7]));
    p.payload_len_bytes = static_cast<std::uint32_t>(text::to_int(f[8]));
    p.tcp_window = static_cast<std::uint32_t>(text::to_int(f[9]));
    p.ordinal = out.size();
    out.push_back(p);
  }
  return out;
}

inline std::vector<PacketRecord> read_packet_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open packet CSV: " + path);
  return read_packet_csv(in);
}

// Loads either a capture file or a packet CSV, chosen by extension.
inline std::vector<PacketRecord> load_packets(const std::string &path, CaptureStats *stats = nullptr) {
  if (text::ends_with(path, ".csv")) return read_packet_csv(path);
  auto cap = parse_capture(path);
  if (stats) *stats = cap.stats;
  return std::move(cap.packets);
}

} // namespace netsentry
