#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::dnswire {

inline constexpr std::uint16_t kTypeA = 1;
inline constexpr std::uint16_t kTypeCname = 5;
inline constexpr std::uint16_t kTypeOpt = 41;
inline constexpr std::uint16_t kClassIn = 1;
inline constexpr std::size_t kMaxLabel = 63;
inline constexpr std::size_t kMaxName = 255;
inline constexpr std::size_t kMaxUdpMessage = 512;

inline constexpr std::uint8_t kRcodeNoError = 0;
inline constexpr std::uint8_t kRcodeFormErr = 1;
inline constexpr std::uint8_t kRcodeRefused = 5;

namespace detail {

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

inline std::uint16_t get_u16(ByteView b, std::size_t off) {
  if (off + 2 > b.size()) throw TruncatedMessage("u16 read past end");
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

inline char lower_char(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

// Reads one possibly compressed name starting at `off`. Returns the labels
// and the offset just past the name's bytes at the original position.
// Pointer chains are bounded so malformed loops surface as TruncatedMessage.
inline std::pair<std::vector<std::string>, std::size_t> read_name(ByteView msg, std::size_t off) {
  std::vector<std::string> labels;
  std::size_t pos = off;
  std::optional<std::size_t> end_at_origin;
  int jumps = 0;
  std::size_t total_len = 0;
  for (;;) {
    if (pos >= msg.size()) throw TruncatedMessage("name runs past end of message");
    const std::uint8_t len = msg[pos];
    if ((len & 0xC0) == 0xC0) {
      if (pos + 2 > msg.size()) throw TruncatedMessage("truncated compression pointer");
      if (!end_at_origin) end_at_origin = pos + 2;
      const std::size_t target = static_cast<std::size_t>((len & 0x3F) << 8) | msg[pos + 1];
      if (++jumps > 64) throw TruncatedMessage("compression pointer loop");
      pos = target;
      continue;
    }
    if ((len & 0xC0) != 0) throw TruncatedMessage("reserved label type");
    if (len == 0) {
      if (!end_at_origin) end_at_origin = pos + 1;
      break;
    }
    if (pos + 1 + len > msg.size()) throw TruncatedMessage("label runs past end of message");
    labels.emplace_back(reinterpret_cast<const char*>(msg.data()) + pos + 1, len);
    total_len += static_cast<std::size_t>(len) + 1;
    if (total_len > kMaxName) throw TruncatedMessage("name exceeds 255 octets");
    pos += 1 + len;
  }
  return {std::move(labels), *end_at_origin};
}

inline std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out.push_back('.');
    out += labels[i];
  }
  return out;
}

inline std::vector<std::string> split_name(std::string_view name) {
  std::vector<std::string> labels;
  std::size_t pos = 0;
  while (pos < name.size()) {
    const std::size_t dot = name.find('.', pos);
    const std::size_t end = dot == std::string_view::npos ? name.size() : dot;
    labels.emplace_back(name.substr(pos, end - pos));
    pos = end + 1;
  }
  return labels;
}

inline void write_name(Bytes& out, const std::vector<std::string>& labels) {
  std::size_t total = 1;
  for (const auto& l : labels) {
    if (l.empty()) throw LabelTooLong("empty label");
    if (l.size() > kMaxLabel) {
      throw LabelTooLong("label of " + std::to_string(l.size()) + " octets exceeds 63");
    }
    total += l.size() + 1;
  }
  if (total > kMaxName) {
    throw NameTooLong("name of " + std::to_string(total) + " octets exceeds 255");
  }
  for (const auto& l : labels) {
    out.push_back(static_cast<std::uint8_t>(l.size()));
    out.insert(out.end(), l.begin(), l.end());
  }
  out.push_back(0);
}

}  // namespace detail

inline std::string lower_name(std::string_view name) {
  std::string out(name);
  for (char& c : out) c = detail::lower_char(c);
  return out;
}

// Parsed view of an inbound query. `raw` retains the datagram so responses can
// echo the question section byte-exactly (case included).
struct QueryView {
  std::uint16_t qid = 0;
  bool rd = false;
  bool well_formed = false;   // plain single-question query shape
  bool literal_name = false;  // question name contains no compression pointers
  std::uint16_t qtype = 0;
  std::uint16_t qclass = 0;
  std::vector<std::string> labels;  // as received, case preserved
  std::string qname_lower;
  std::size_t question_end = 0;  // offset just past the question section
  Bytes raw;

  const std::string& first_label() const {
    static const std::string empty;
    return labels.empty() ? empty : labels.front();
  }
};

inline QueryView parse_query(ByteView dgram) {
  if (dgram.size() < 12) throw TruncatedMessage("shorter than a DNS header");
  QueryView q;
  q.raw.assign(dgram.begin(), dgram.end());
  q.qid = detail::get_u16(dgram, 0);
  const std::uint16_t flags = detail::get_u16(dgram, 2);
  const bool qr = (flags & 0x8000) != 0;
  const std::uint8_t opcode = (flags >> 11) & 0x0F;
  q.rd = (flags & 0x0100) != 0;
  const std::uint16_t qdcount = detail::get_u16(dgram, 4);
  if (qr || opcode != 0 || qdcount != 1) {
    q.well_formed = false;
    return q;
  }
  auto [labels, end] = detail::read_name(dgram, 12);
  q.literal_name = true;
  for (std::size_t pos = 12; pos < end;) {
    const std::uint8_t len = dgram[pos];
    if ((len & 0xC0) == 0xC0) {
      q.literal_name = false;
      break;
    }
    pos += (len == 0) ? 1 : 1 + len;
  }
  q.qtype = detail::get_u16(dgram, end);
  q.qclass = detail::get_u16(dgram, end + 2);
  q.question_end = end + 4;
  q.labels = std::move(labels);
  q.qname_lower = lower_name(detail::join_labels(q.labels));
  q.well_formed = true;
  return q;
}

inline Bytes build_query(std::uint16_t qid, std::string_view payload_label,
                         std::string_view domain, bool rd = true) {
  std::vector<std::string> labels;
  labels.emplace_back(payload_label);
  for (auto& l : detail::split_name(domain)) labels.push_back(std::move(l));
  Bytes out;
  detail::put_u16(out, qid);
  detail::put_u16(out, rd ? 0x0100 : 0x0000);
  detail::put_u16(out, 1);  // qdcount
  detail::put_u16(out, 0);
  detail::put_u16(out, 0);
  detail::put_u16(out, 0);
  detail::write_name(out, labels);
  detail::put_u16(out, kTypeA);
  detail::put_u16(out, kClassIn);
  return out;
}

namespace detail {

// Response header + question section copied verbatim from the query.
inline Bytes response_scaffold(const QueryView& q, std::uint16_t ancount, std::uint8_t rcode) {
  Bytes out;
  put_u16(out, q.qid);
  std::uint16_t flags = 0x8000;               // QR
  flags |= 0x0400;                            // AA
  if (q.rd) flags |= 0x0100;                  // RD echoed
  flags |= 0x0080;                            // RA
  flags |= rcode & 0x0F;
  put_u16(out, flags);
  put_u16(out, q.well_formed ? 1 : 0);
  put_u16(out, ancount);
  put_u16(out, 0);
  put_u16(out, 0);
  if (q.well_formed) {
    out.insert(out.end(), q.raw.begin() + 12, q.raw.begin() + static_cast<std::ptrdiff_t>(q.question_end));
  }
  return out;
}

}  // namespace detail

// Header-only reply for datagrams whose question cannot be echoed.
inline Bytes build_error_response(std::uint16_t qid, std::uint8_t rcode) {
  Bytes out;
  detail::put_u16(out, qid);
  detail::put_u16(out, static_cast<std::uint16_t>(0x8000 | 0x0080 | (rcode & 0x0F)));
  detail::put_u16(out, 0);
  detail::put_u16(out, 0);
  detail::put_u16(out, 0);
  detail::put_u16(out, 0);
  return out;
}

// NOERROR/NODATA or REFUSED-style reply echoing the question, no answers.
inline Bytes build_empty_response(const QueryView& q, std::uint8_t rcode) {
  return detail::response_scaffold(q, 0, rcode);
}

inline Bytes build_ack_response(const QueryView& q, std::uint32_t answer_ip, std::uint32_t ttl) {
  Bytes out = detail::response_scaffold(q, 1, kRcodeNoError);
  detail::put_u16(out, 0xC00C);  // owner = question name
  detail::put_u16(out, kTypeA);
  detail::put_u16(out, kClassIn);
  detail::put_u32(out, ttl);
  detail::put_u16(out, 4);
  detail::put_u32(out, answer_ip);
  return out;
}

// CNAME answer whose target carries `data_label` under the query's own domain
// part, then an A record resolving that target. Requires a literal question
// name (protocol queries always are) because the target name and the A
// record's owner compress against it.
inline Bytes build_data_response(const QueryView& q, std::string_view data_label,
                                 std::uint32_t answer_ip, std::uint32_t ttl) {
  if (!q.well_formed || !q.literal_name || q.labels.empty()) {
    throw TruncatedMessage("data response requires a literal single-question query");
  }
  if (data_label.size() > kMaxLabel) {
    throw LabelTooLong("label of " + std::to_string(data_label.size()) + " octets exceeds 63");
  }
  if (1 + data_label.size() + 1 + (q.qname_lower.size() - q.first_label().size()) > kMaxName) {
    throw NameTooLong("CNAME target exceeds 255 octets");
  }
  Bytes out = detail::response_scaffold(q, 2, kRcodeNoError);
  // Domain part of the question name starts right after its first label.
  const std::uint16_t domain_off = static_cast<std::uint16_t>(12 + 1 + q.first_label().size());

  detail::put_u16(out, 0xC00C);  // CNAME owner = question name
  detail::put_u16(out, kTypeCname);
  detail::put_u16(out, kClassIn);
  detail::put_u32(out, ttl);
  const std::uint16_t cname_rdlen = static_cast<std::uint16_t>(1 + data_label.size() + 2);
  detail::put_u16(out, cname_rdlen);
  const std::uint16_t target_off = static_cast<std::uint16_t>(out.size());
  out.push_back(static_cast<std::uint8_t>(data_label.size()));
  out.insert(out.end(), data_label.begin(), data_label.end());
  detail::put_u16(out, static_cast<std::uint16_t>(0xC000 | domain_off));

  detail::put_u16(out, static_cast<std::uint16_t>(0xC000 | target_off));  // A owner = CNAME target
  detail::put_u16(out, kTypeA);
  detail::put_u16(out, kClassIn);
  detail::put_u32(out, ttl);
  detail::put_u16(out, 4);
  detail::put_u32(out, answer_ip);
  if (out.size() > kMaxUdpMessage) {
    throw NameTooLong("response exceeds 512 octets");
  }
  return out;
}

enum class ResponseKind { ack, data, other };

struct AnswerView {
  std::string name_lower;
  std::uint16_t type = 0;
  std::uint16_t klass = 0;
  std::uint32_t ttl = 0;
  std::uint32_t a_addr = 0;         // valid when type == A
  std::string cname_target;         // as received, valid when type == CNAME
};

struct ResponseView {
  std::uint16_t qid = 0;
  std::uint8_t rcode = 0;
  bool qr = false;
  ResponseKind kind = ResponseKind::other;
  std::string qname_lower;
  std::string data_label;  // first label of the CNAME target, case preserved
  std::uint32_t a_addr = 0;
  std::vector<AnswerView> answers;
};

inline ResponseView parse_response(ByteView dgram) {
  if (dgram.size() < 12) throw TruncatedMessage("shorter than a DNS header");
  ResponseView r;
  r.qid = detail::get_u16(dgram, 0);
  const std::uint16_t flags = detail::get_u16(dgram, 2);
  r.qr = (flags & 0x8000) != 0;
  r.rcode = static_cast<std::uint8_t>(flags & 0x0F);
  const std::uint16_t qdcount = detail::get_u16(dgram, 4);
  const std::uint16_t ancount = detail::get_u16(dgram, 6);
  std::size_t pos = 12;
  for (std::uint16_t i = 0; i < qdcount; ++i) {
    auto [labels, end] = detail::read_name(dgram, pos);
    if (i == 0) r.qname_lower = lower_name(detail::join_labels(labels));
    pos = end + 4;
    if (pos > dgram.size()) throw TruncatedMessage("question section truncated");
  }
  for (std::uint16_t i = 0; i < ancount; ++i) {
    AnswerView a;
    auto [labels, end] = detail::read_name(dgram, pos);
    a.name_lower = lower_name(detail::join_labels(labels));
    a.type = detail::get_u16(dgram, end);
    a.klass = detail::get_u16(dgram, end + 2);
    if (end + 10 > dgram.size()) throw TruncatedMessage("answer header truncated");
    a.ttl = (static_cast<std::uint32_t>(dgram[end + 4]) << 24) |
            (static_cast<std::uint32_t>(dgram[end + 5]) << 16) |
            (static_cast<std::uint32_t>(dgram[end + 6]) << 8) |
            static_cast<std::uint32_t>(dgram[end + 7]);
    const std::uint16_t rdlen = detail::get_u16(dgram, end + 8);
    const std::size_t rdata = end + 10;
    if (rdata + rdlen > dgram.size()) throw TruncatedMessage("rdata truncated");
    if (a.type == kTypeA && a.klass == kClassIn && rdlen == 4) {
      a.a_addr = (static_cast<std::uint32_t>(dgram[rdata]) << 24) |
                 (static_cast<std::uint32_t>(dgram[rdata + 1]) << 16) |
                 (static_cast<std::uint32_t>(dgram[rdata + 2]) << 8) |
                 static_cast<std::uint32_t>(dgram[rdata + 3]);
    } else if (a.type == kTypeCname && a.klass == kClassIn) {
      auto [tlabels, tend] = detail::read_name(dgram, rdata);
      (void)tend;
      a.cname_target = detail::join_labels(tlabels);
    }
    r.answers.push_back(std::move(a));
    pos = rdata + rdlen;
  }
  if (!r.qr) {
    r.kind = ResponseKind::other;
  } else if (r.rcode == kRcodeNoError && r.answers.size() == 1 &&
             r.answers[0].type == kTypeA && r.answers[0].klass == kClassIn) {
    r.kind = ResponseKind::ack;
    r.a_addr = r.answers[0].a_addr;
  } else if (r.rcode == kRcodeNoError && r.answers.size() == 2 &&
             r.answers[0].type == kTypeCname && r.answers[1].type == kTypeA &&
             !r.answers[0].cname_target.empty() &&
             lower_name(r.answers[0].cname_target) == r.answers[1].name_lower) {
    r.kind = ResponseKind::data;
    const std::string& target = r.answers[0].cname_target;
    const std::size_t dot = target.find('.');
    r.data_label = dot == std::string::npos ? target : target.substr(0, dot);
    r.a_addr = r.answers[1].a_addr;
  } else {
    r.kind = ResponseKind::other;
  }
  return r;
}

// Byte ranges of literal label text across the message (question names, RR
// owner names, CNAME targets). Pointer bytes and pointer targets outside the
// walked position are excluded; a censor flipping letter case only ever
// touches these ranges. Throws TruncatedMessage on unparseable input.
inline std::vector<std::pair<std::size_t, std::size_t>> label_byte_ranges(ByteView msg) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  if (msg.size() < 12) throw TruncatedMessage("shorter than a DNS header");
  auto walk_name = [&](std::size_t off) -> std::size_t {
    std::size_t pos = off;
    for (;;) {
      if (pos >= msg.size()) throw TruncatedMessage("name runs past end");
      const std::uint8_t len = msg[pos];
      if ((len & 0xC0) == 0xC0) {
        if (pos + 2 > msg.size()) throw TruncatedMessage("truncated pointer");
        return pos + 2;
      }
      if ((len & 0xC0) != 0) throw TruncatedMessage("reserved label type");
      if (len == 0) return pos + 1;
      if (pos + 1 + len > msg.size()) throw TruncatedMessage("label runs past end");
      ranges.emplace_back(pos + 1, static_cast<std::size_t>(len));
      pos += 1 + len;
    }
  };
  const std::uint16_t qdcount = detail::get_u16(msg, 4);
  const std::uint16_t ancount = detail::get_u16(msg, 6);
  const std::uint16_t nscount = detail::get_u16(msg, 8);
  const std::uint16_t arcount = detail::get_u16(msg, 10);
  std::size_t pos = 12;
  for (std::uint16_t i = 0; i < qdcount; ++i) {
    pos = walk_name(pos) + 4;
    if (pos > msg.size()) throw TruncatedMessage("question truncated");
  }
  const std::uint32_t rrs = static_cast<std::uint32_t>(ancount) + nscount + arcount;
  for (std::uint32_t i = 0; i < rrs; ++i) {
    pos = walk_name(pos);
    const std::uint16_t type = detail::get_u16(msg, pos);
    const std::uint16_t rdlen = detail::get_u16(msg, pos + 8);
    const std::size_t rdata = pos + 10;
    if (rdata + rdlen > msg.size()) throw TruncatedMessage("rdata truncated");
    if (type == kTypeCname) walk_name(rdata);
    pos = rdata + rdlen;
  }
  return ranges;
}

}  // namespace dnsmorph::dnswire
