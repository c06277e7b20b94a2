#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/errors.hpp"

namespace dnsmorph::reliability {

// Exponentially weighted RTT with alpha = 1/8; the first sample initializes
// the estimate verbatim.
class RttEstimator {
 public:
  static constexpr double kAlpha = 1.0 / 8.0;

  void add_sample(double sample_s) {
    if (sample_s <= 0) throw NonPositiveSample("rtt sample must be positive");
    rtt_ = primed_ ? kAlpha * sample_s + (1.0 - kAlpha) * rtt_ : sample_s;
    primed_ = true;
  }

  bool primed() const { return primed_; }
  double rtt() const { return rtt_; }

  double timeout(double k = 2.0, double fallback = 1.0) const {
    return primed_ ? k * rtt_ : fallback;
  }

 private:
  double rtt_ = 0.0;
  bool primed_ = false;
};

struct SendEntry {
  std::uint16_t identity = 0;
  std::string fragment;
  Bytes wire;                        // current datagram; qid lives in bytes 0..1
  std::vector<std::uint16_t> qids;   // every qid this entry was sent under
  double sent_at = 0;                // last transmission time
  double retx_at = 0;                // timer deadline
  int transmissions = 0;

  std::uint16_t qid() const { return qids.empty() ? 0 : qids.back(); }
};

// Selective-repeat send side: at most four packets outstanding, kept in send
// order. Three acks landing on other entries while the head stays unacked
// schedule an immediate head retransmission under a fresh query ID; a
// per-entry timer covers the case where too few acks arrive at all.
class SendWindow {
 public:
  static constexpr std::size_t kMaxOutstanding = 4;
  static constexpr int kMaxTransmissions = 5;

  bool can_push() const { return entries_.size() < kMaxOutstanding; }

  SendEntry& push(SendEntry entry) {
    if (!can_push()) throw WindowFull("send window already holds 4 packets");
    if (!entries_.empty() && entry.identity <= entries_.back().identity) {
      throw Error("send window entries must have increasing identities");
    }
    entries_.push_back(std::move(entry));
    max_outstanding_seen_ = std::max(max_outstanding_seen_, entries_.size());
    return entries_.back();
  }

  struct AckResult {
    bool matched = false;
    std::optional<double> rtt_sample;  // only from never-retransmitted entries
  };

  AckResult on_ack(std::uint16_t qid, double now) {
    AckResult res;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& qs = entries_[i].qids;
      if (std::find(qs.begin(), qs.end(), qid) == qs.end()) continue;
      res.matched = true;
      if (entries_[i].transmissions == 1) res.rtt_sample = now - entries_[i].sent_at;
      const bool was_head = i == 0;
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
      if (was_head) {
        acks_since_head_ = 0;
        head_resend_pending_ = false;
      } else if (!entries_.empty() && ++acks_since_head_ >= 3) {
        head_resend_pending_ = true;
      }
      return res;
    }
    return res;
  }

  // Entries that must be retransmitted now. The caller re-stamps qid, wire,
  // counters and deadline; the three-ack counter resets here.
  std::vector<SendEntry*> due(double now) {
    std::vector<SendEntry*> out;
    if (head_resend_pending_ && !entries_.empty()) {
      out.push_back(&entries_.front());
      head_resend_pending_ = false;
      acks_since_head_ = 0;
    }
    for (auto& e : entries_) {
      if (e.retx_at <= now && (out.empty() || out.front() != &e)) out.push_back(&e);
    }
    return out;
  }

  bool resend_pending() const { return head_resend_pending_; }

  std::optional<double> next_deadline() const {
    std::optional<double> t;
    for (const auto& e : entries_) {
      if (!t || e.retx_at < *t) t = e.retx_at;
    }
    return t;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t outstanding() const { return entries_.size(); }
  std::size_t max_outstanding_seen() const { return max_outstanding_seen_; }
  int acks_since_head() const { return acks_since_head_; }
  const std::deque<SendEntry>& entries() const { return entries_; }

 private:
  std::deque<SendEntry> entries_;
  int acks_since_head_ = 0;
  bool head_resend_pending_ = false;
  std::size_t max_outstanding_seen_ = 0;
};

// Stop-and-wait outstanding packet: a timeout re-sends the identical bytes
// (same query ID, as resolvers do); the third unanswered transmission is the
// last one ever made.
class StopWait {
 public:
  static constexpr int kMaxTransmissions = 3;

  void arm(Bytes wire, double now, double timeout) {
    wire_ = std::move(wire);
    transmissions_ = 1;
    deadline_ = now + timeout;
    armed_ = true;
  }

  enum class Action { resend, fail };

  Action on_timeout(double now, double timeout) {
    if (transmissions_ >= kMaxTransmissions) return Action::fail;
    ++transmissions_;
    deadline_ = now + timeout;
    return Action::resend;
  }

  void delivered() { armed_ = false; }

  bool armed() const { return armed_; }
  std::uint16_t qid() const {
    return armed_ && wire_.size() >= 2 ? static_cast<std::uint16_t>((wire_[0] << 8) | wire_[1]) : 0;
  }
  const Bytes& wire() const { return wire_; }
  int transmissions() const { return transmissions_; }
  std::optional<double> deadline() const {
    return armed_ ? std::optional<double>(deadline_) : std::nullopt;
  }

 private:
  Bytes wire_;
  int transmissions_ = 0;
  double deadline_ = 0;
  bool armed_ = false;
};

enum class RecvAction { buffer_it, ack_only };

// A duplicate identity is acknowledged but never re-buffered; this covers
// sender retransmissions and replayed captures alike.
inline RecvAction dedupe_on_receive(const std::map<std::uint16_t, std::string>& buffer,
                                    std::uint16_t identity) {
  return buffer.contains(identity) ? RecvAction::ack_only : RecvAction::buffer_it;
}

// A direction is complete when the contiguous identity run that starts at the
// smallest buffered identity carries exactly that many characters: the first
// packet's identity equals the direction's total encoded length, and every
// proper prefix of the fragments sums to less than it.
inline bool receive_complete(const std::map<std::uint16_t, std::string>& buffer) {
  if (buffer.empty()) return false;
  const std::uint16_t first = buffer.begin()->first;
  std::size_t sum = 0;
  std::uint16_t expect = first;
  for (const auto& [id, frag] : buffer) {
    if (id != expect) break;
    sum += frag.size();
    if (sum == first) return true;
    if (sum > first) return false;
    if (expect == 0xFFFF) break;
    ++expect;
  }
  return false;
}

inline std::string reassemble_buffer(const std::map<std::uint16_t, std::string>& buffer) {
  std::string out;
  const std::uint16_t first = buffer.empty() ? 0 : buffer.begin()->first;
  std::size_t sum = 0;
  std::uint16_t expect = first;
  for (const auto& [id, frag] : buffer) {
    if (id != expect) break;
    out += frag;
    sum += frag.size();
    if (sum >= first) break;
    ++expect;
  }
  return out;
}

}  // namespace dnsmorph::reliability
