#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/dns_wire.hpp"
#include "dnsmorph/errors.hpp"
#include "dnsmorph/simnet.hpp"

namespace dnsmorph::entropy {

namespace detail {

inline std::size_t deflate_size(ByteView corpus) {
  uLongf len = compressBound(static_cast<uLong>(corpus.size()));
  std::vector<Bytef> out(len);
  const int rc = compress2(out.data(), &len, corpus.data(), static_cast<uLong>(corpus.size()),
                           Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw Error("deflate failed with code " + std::to_string(rc));
  return len;
}

// Last column of the sorted cyclic-rotation matrix. Quadratic worst case is
// irrelevant at corpus sizes of a few kilobytes.
inline Bytes burrows_wheeler(ByteView in) {
  const std::size_t n = in.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint8_t ca = in[(a + k) % n];
      const std::uint8_t cb = in[(b + k) % n];
      if (ca != cb) return ca < cb;
    }
    return a < b;
  });
  Bytes out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = in[(order[i] + n - 1) % n];
  return out;
}

inline Bytes move_to_front(ByteView in) {
  std::vector<std::uint8_t> table(256);
  std::iota(table.begin(), table.end(), 0);
  Bytes out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto it = std::find(table.begin(), table.end(), in[i]);
    const auto pos = static_cast<std::uint8_t>(it - table.begin());
    out[i] = pos;
    table.erase(it);
    table.insert(table.begin(), in[i]);
  }
  return out;
}

}  // namespace detail

inline double deflate_ratio(ByteView corpus) {
  if (corpus.empty()) throw EmptyCorpus("cannot compress an empty corpus");
  return static_cast<double>(detail::deflate_size(corpus)) / static_cast<double>(corpus.size());
}

// Block-sorting compressor class stand-in: Burrows-Wheeler plus move-to-front
// in front of the same entropy coder. Reported alongside the plain DEFLATE
// ratio; close ratios on the same corpus indicate no exploitable structure.
inline double block_sort_ratio(ByteView corpus) {
  if (corpus.empty()) throw EmptyCorpus("cannot compress an empty corpus");
  const Bytes transformed = detail::move_to_front(view(detail::burrows_wheeler(corpus)));
  return static_cast<double>(detail::deflate_size(view(transformed))) /
         static_cast<double>(corpus.size());
}

struct EntropyReport {
  std::size_t corpus_bytes = 0;
  std::size_t prefixes = 0;
  double deflate = 0;
  double block_sort = 0;
};

// Input format: one domain-name prefix (the payload label) per line; the
// ratios are computed over the concatenated prefixes.
inline EntropyReport check_prefix_lines(std::string_view text) {
  Bytes corpus;
  std::size_t prefixes = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (!line.empty()) {
      corpus.insert(corpus.end(), line.begin(), line.end());
      ++prefixes;
    }
    pos = nl + 1;
  }
  if (corpus.empty()) throw EmptyCorpus("no prefixes in input");
  EntropyReport r;
  r.corpus_bytes = corpus.size();
  r.prefixes = prefixes;
  r.deflate = deflate_ratio(view(corpus));
  r.block_sort = block_sort_ratio(view(corpus));
  return r;
}

// Extracts up to `max_labels` payload labels from client queries in a
// transcript, one per line, matching the checker's input format.
inline std::string prefix_lines_from_transcript(const std::vector<simnet::TranscriptEntry>& entries,
                                                std::size_t max_labels) {
  std::string out;
  std::size_t taken = 0;
  for (const auto& e : entries) {
    if (taken >= max_labels) break;
    if (e.dir != 'C') continue;
    try {
      const auto q = dnswire::parse_query(view(e.bytes));
      if (!q.well_formed) continue;
      const std::string& label = q.first_label();
      if (label.size() < session::kMinPayloadLabel || label.size() > session::kMaxPayloadLabel) {
        continue;
      }
      out += label;
      out.push_back('\n');
      ++taken;
    } catch (const Error&) {
      continue;
    }
  }
  return out;
}

}  // namespace dnsmorph::entropy
