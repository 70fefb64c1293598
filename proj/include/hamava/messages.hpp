#pragma once

#include "hamava/codec.hpp"
#include "hamava/core.hpp"

#include <memory>
#include <optional>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

namespace hamava {

// Any struct exposing fields() encodes as the concatenation of its fields.
template <class Sink, class T>
    requires requires(const T& t) { t.fields(); }
void encode(Sink& s, const T& value) {
    std::apply([&](const auto&... f) { (encode(s, f), ...); }, value.fields());
}

template <class Sink, class A, class B>
void encode(Sink& s, const std::pair<A, B>& p) {
    encode(s, p.first);
    encode(s, p.second);
}

template <class Sink>
void encode(Sink& s, ReconfigKind k) {
    put_u8(s, static_cast<std::uint8_t>(k));
}

// ---------------------------------------------------------------------------
// Signed statements. Every signature in the protocol is over one of these.

inline Digest prepare_statement(ClusterId c, Round r, LeaderTs ts, std::uint64_t seq, Digest txn) {
    return statement_digest("tob-prepare", c, r, ts, seq, txn);
}
inline Digest commit_statement(ClusterId c, Round r, LeaderTs ts, std::uint64_t seq, Digest txn) {
    return statement_digest("tob-commit", c, r, ts, seq, txn);
}
inline Digest election_statement(ClusterId c, LeaderTs ts) {
    return statement_digest("elect-complaint", c, ts);
}
inline Digest recs_statement(ClusterId c, Round r, Digest recs) {
    return statement_digest("brd-recs", c, r, recs);
}
inline Digest echo_statement(ClusterId c, Round r, LeaderTs ts, Digest set) {
    return statement_digest("brd-echo", c, r, ts, set);
}
inline Digest ready_statement(ClusterId c, Round r, LeaderTs ts, Digest set) {
    return statement_digest("brd-ready", c, r, ts, set);
}
inline Digest lcomplaint_statement(ClusterId from, ClusterId target, std::uint64_t c, Round r) {
    return statement_digest("lcomplaint", from, target, c, r);
}

// ---------------------------------------------------------------------------
// Local ordering (reference TOB)

struct TxnForward {
    Txn txn;
    auto fields() const { return std::tie(txn); }
};

struct Propose {
    Round r = 0;
    LeaderTs ts = 0;
    std::uint64_t seq = 0;
    Txn txn;
    auto fields() const { return std::tie(r, ts, seq, txn); }
};

struct Prepare {
    Round r = 0;
    LeaderTs ts = 0;
    std::uint64_t seq = 0;
    Digest txn_digest = 0;
    SignatureToken sig;
    auto fields() const { return std::tie(r, ts, seq, txn_digest, sig); }
};

struct Commit {
    Round r = 0;
    LeaderTs ts = 0;
    std::uint64_t seq = 0;
    Txn txn;
    SignatureToken sig;
    auto fields() const { return std::tie(r, ts, seq, txn, sig); }
};

enum class LockEvidence : std::uint8_t { PrepareQuorum = 0, CommitAmplified = 1 };

/// Highest-timestamp prepared value a replica holds for one sequence number.
struct TobLock {
    std::uint64_t seq = 0;
    LeaderTs ts = 0;
    Txn txn;
    std::uint64_t evidence = 0;  ///< LockEvidence
    std::vector<SignatureToken> sigs;
    auto fields() const { return std::tie(seq, ts, txn, evidence, sigs); }
};

inline Digest view_report_statement(ClusterId c, Round r, LeaderTs ts, const std::vector<TobLock>& locks) {
    return statement_digest("tob-view-report", c, r, ts, locks);
}

struct ViewReport {
    Round r = 0;
    LeaderTs ts = 0;
    std::vector<TobLock> locks;
    SignatureToken sig;
    auto fields() const { return std::tie(r, ts, locks, sig); }
};

struct NewView {
    Round r = 0;
    LeaderTs ts = 0;
    std::vector<ViewReport> reports;
    auto fields() const { return std::tie(r, ts, reports); }
};

// ---------------------------------------------------------------------------
// Leader election

struct ElectComplaint {
    LeaderTs ts = 0;
    SignatureToken sig;
    auto fields() const { return std::tie(ts, sig); }
};

// ---------------------------------------------------------------------------
// Byzantine reliable dissemination

/// One replica's signed contribution: its collected reconfiguration requests.
struct RecsMsg {
    ReplicaId sender;
    Round r = 0;
    RecsSet recs;
    SignatureToken sig;  ///< by sender over recs_statement
    auto fields() const { return std::tie(sender, r, recs, sig); }
};

/// Sender-attributed message set M.
using AttributedSet = std::map<ReplicaId, RecsMsg>;

enum class AttestationKind : std::uint8_t { Origin = 0, EchoQuorum = 1, ReadyAmplified = 2 };

struct Attestation {
    std::uint64_t kind = 0;  ///< AttestationKind
    LeaderTs ts = 0;         ///< epoch of the Echo/Ready signatures
    std::vector<SignatureToken> sigs;
    auto fields() const { return std::tie(kind, ts, sigs); }
};

struct BrdContribution {
    Round r = 0;
    LeaderTs ts = 0;
    RecsMsg m;
    auto fields() const { return std::tie(r, ts, m); }
};

struct Agg {
    Round r = 0;
    LeaderTs ts = 0;
    AttributedSet set;
    Attestation att;
    auto fields() const { return std::tie(r, ts, set, att); }
};

struct Echo {
    Round r = 0;
    LeaderTs ts = 0;
    AttributedSet set;
    SignatureToken sig;
    auto fields() const { return std::tie(r, ts, set, sig); }
};

struct Ready {
    Round r = 0;
    LeaderTs ts = 0;
    AttributedSet set;
    SignatureToken sig;
    auto fields() const { return std::tie(r, ts, set, sig); }
};

struct Valid {
    Round r = 0;
    LeaderTs ts = 0;  ///< epoch of the receiving leader
    AttributedSet set;
    Attestation att;
    auto fields() const { return std::tie(r, ts, set, att); }
};

// ---------------------------------------------------------------------------
// Reconfiguration collection and state transfer

struct Request {
    ReconfigRequest req;
    auto fields() const { return std::tie(req); }
};

struct Ack {
    ClusterId cluster;
    std::set<ReplicaId> members;
    Round r = 0;
    auto fields() const { return std::tie(cluster, members, r); }
};

struct RoundHint {
    Round r = 0;
    auto fields() const { return std::tie(r); }
};

/// Per-transaction commit certificate plus the dissemination proof for the
/// round's Reconfig operation.
struct TransCert {
    LeaderTs ts = 0;
    std::vector<SignatureToken> sigs;
    auto fields() const { return std::tie(ts, sigs); }
};

struct ReconfigProof {
    AttributedSet set;
    LeaderTs ready_ts = 0;
    std::vector<SignatureToken> ready_sigs;
    auto fields() const { return std::tie(set, ready_ts, ready_sigs); }
};

struct OpsCerts {
    std::vector<TransCert> trans;
    ReconfigProof reconfig;
    auto fields() const { return std::tie(trans, reconfig); }
};

struct KvState {
    std::map<std::uint64_t, std::uint64_t> store;
    Digest log = 0;
    std::uint64_t applied = 0;
    auto fields() const { return std::tie(store, log, applied); }
};

struct CurrStateBody {
    KvState state;
    Configuration config;
    Round r = 0;
    ClusterId cluster;
    std::set<ReplicaId> prev_members;
    std::vector<Operation> p_ops;
    OpsCerts p_certs;
    auto fields() const { return std::tie(state, config, r, cluster, prev_members, p_ops, p_certs); }
};

struct CurrState {
    CurrStateBody body;
    LeaderTs ts = 0;  ///< sender's leader timestamp; not part of the matched content
    auto fields() const { return std::tie(body, ts); }
};

// ---------------------------------------------------------------------------
// Inter-cluster broadcast and remote leader change

struct Inter {
    Round r = 0;
    ClusterId from;
    std::vector<Operation> ops;
    OpsCerts certs;
    auto fields() const { return std::tie(r, from, ops, certs); }
};

struct Local {
    Round r = 0;
    ClusterId from;
    std::vector<Operation> ops;
    OpsCerts certs;
    auto fields() const { return std::tie(r, from, ops, certs); }
};

struct LComplaint {
    ClusterId target;
    std::uint64_t c = 0;
    Round r = 0;
    SignatureToken sig;
    auto fields() const { return std::tie(target, c, r, sig); }
};

struct RComplaint {
    std::uint64_t c = 0;
    ClusterId from;
    std::vector<SignatureToken> sigs;
    Round r = 0;
    auto fields() const { return std::tie(c, from, sigs, r); }
};

/// In-cluster relay of an accepted RComplaint.
struct ComplaintRelay {
    std::uint64_t c = 0;
    ClusterId from;
    std::vector<SignatureToken> sigs;
    Round r = 0;
    auto fields() const { return std::tie(c, from, sigs, r); }
};

/// A certified past batch sent to a lagging member of the sender's own cluster.
struct CatchUp {
    Round r = 0;
    ClusterId c;
    std::vector<Operation> ops;
    OpsCerts certs;
    auto fields() const { return std::tie(r, c, ops, certs); }
};

using Message = std::variant<TxnForward, Propose, Prepare, Commit, ViewReport, NewView, ElectComplaint,
                             BrdContribution, Agg, Echo, Ready, Valid, Request, Ack, RoundHint,
                             CurrState, Inter, Local, LComplaint, RComplaint, ComplaintRelay, CatchUp>;

template <class Sink>
void encode(Sink& s, const Message& m) {
    put_u8(s, static_cast<std::uint8_t>(m.index()));
    std::visit([&](const auto& body) { encode(s, body); }, m);
}

/// An immutable message with its digest computed once.
struct Packet {
    Message body;
    Digest digest = 0;
};
using PacketPtr = std::shared_ptr<const Packet>;

inline PacketPtr make_packet(Message m) {
    auto p = std::make_shared<Packet>();
    p->body = std::move(m);
    p->digest = digest_of(p->body);
    return p;
}

std::string_view message_name(const Message& m);

/// Round tag carried by the message, when it has one.
std::optional<Round> message_round(const Message& m);

/// Inter-cluster traffic (counted as global communication).
bool is_global(const Message& m);

/// Coarse category used by the metrics tables.
std::string_view message_category(const Message& m);

Digest ops_digest(const std::vector<Operation>& ops);
Digest txn_digest(const Txn& t);
Digest set_digest(const AttributedSet& set);
RecsSet union_of(const AttributedSet& set);

}  // namespace hamava
