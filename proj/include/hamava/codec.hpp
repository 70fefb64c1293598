#pragma once

// Canonical byte encoding. Integers are fixed-width big-endian, sequences are
// length-prefixed, sets and maps are written in key order, variants carry a
// one-byte tag. Digests are FNV-1a/64 over that encoding followed by a
// splitmix finalizer.

#include "hamava/core.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hamava {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class HashSink {
public:
    void put_byte(std::uint8_t b) {
        state_ ^= b;
        state_ *= 0x100000001b3ULL;
    }
    Digest finish() const { return mix64(state_); }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

class ByteSink {
public:
    void put_byte(std::uint8_t b) { bytes.push_back(b); }
    std::vector<std::uint8_t> bytes;
};

template <class Sink>
void put_u64(Sink& s, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) s.put_byte(static_cast<std::uint8_t>(v >> shift));
}
template <class Sink>
void put_u8(Sink& s, std::uint8_t v) {
    s.put_byte(v);
}
template <class Sink>
void put_str(Sink& s, std::string_view v) {
    put_u64(s, v.size());
    for (char c : v) s.put_byte(static_cast<std::uint8_t>(c));
}

template <class Sink> void encode(Sink& s, std::uint64_t v) { put_u64(s, v); }
template <class Sink> void encode(Sink& s, std::uint32_t v) { put_u64(s, v); }
template <class Sink> void encode(Sink& s, bool v) { put_u8(s, v ? 1 : 0); }
template <class Sink> void encode(Sink& s, const std::string& v) { put_str(s, v); }
template <class Sink> void encode(Sink& s, ReplicaId v) { put_u64(s, v.value); }
template <class Sink> void encode(Sink& s, ClusterId v) { put_u64(s, v.index); }

template <class Sink>
void encode(Sink& s, const SignatureToken& t) {
    encode(s, t.signer);
    put_u64(s, t.digest);
    put_u64(s, t.mac);
}

template <class Sink>
void encode(Sink& s, const Certificate& c) {
    put_u64(s, c.subject);
    put_u64(s, c.signatures.size());
    for (const auto& t : c.signatures) encode(s, t);
}

template <class Sink>
void encode(Sink& s, const Txn& t) {
    encode(s, t.origin);
    put_u64(s, t.seq);
    put_u8(s, static_cast<std::uint8_t>(t.kind));
    put_u64(s, t.key);
    put_u64(s, t.value);
}

template <class Sink>
void encode(Sink& s, const ReconfigRequest& r) {
    put_u8(s, static_cast<std::uint8_t>(r.kind));
    encode(s, r.subject);
    encode(s, r.cluster);
    put_u64(s, r.round);
    encode(s, r.signature);
}

template <class Sink>
void encode(Sink& s, const RecsSet& recs) {
    put_u64(s, recs.size());
    for (const auto& [key, req] : recs.items()) encode(s, req);
}

template <class Sink>
void encode(Sink& s, const Operation& op) {
    put_u8(s, static_cast<std::uint8_t>(op.index()));
    if (const auto* t = std::get_if<Trans>(&op)) {
        encode(s, t->origin);
        encode(s, t->txn);
    } else {
        encode(s, std::get<Reconfig>(op).recs);
    }
}

template <class Sink, class T>
void encode(Sink& s, const std::vector<T>& v) {
    put_u64(s, v.size());
    for (const auto& x : v) encode(s, x);
}

template <class Sink, class T>
void encode(Sink& s, const std::set<T>& v) {
    put_u64(s, v.size());
    for (const auto& x : v) encode(s, x);
}

template <class Sink, class K, class V>
void encode(Sink& s, const std::map<K, V>& m) {
    put_u64(s, m.size());
    for (const auto& [k, v] : m) {
        encode(s, k);
        encode(s, v);
    }
}

template <class Sink>
void encode(Sink& s, const Configuration& c) {
    encode(s, c.all());
    put_u64(s, c.effective_round());
}

template <class T>
Digest digest_of(const T& value) {
    HashSink h;
    encode(h, value);
    return h.finish();
}

template <class T>
std::vector<std::uint8_t> bytes_of(const T& value) {
    ByteSink b;
    encode(b, value);
    return std::move(b.bytes);
}

/// Digest of a tagged tuple of integers; used for signed statements.
template <class... Ts>
Digest statement_digest(std::string_view tag, const Ts&... parts) {
    HashSink h;
    put_str(h, tag);
    (encode(h, parts), ...);
    return h.finish();
}

inline Digest chain(Digest prev, Digest next) {
    HashSink h;
    put_u64(h, prev);
    put_u64(h, next);
    return h.finish();
}

std::string hex(Digest d);

}  // namespace hamava
