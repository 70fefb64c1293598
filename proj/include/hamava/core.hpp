#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hamava {

using Digest = std::uint64_t;
using Round = std::uint64_t;
using LeaderTs = std::uint64_t;
using SimTime = std::uint64_t;

/// Globally unique replica identity. Ids compare by their big-endian byte
/// encoding, which coincides with numeric order.
struct ReplicaId {
    std::uint64_t value = 0;
    auto operator<=>(const ReplicaId&) const = default;
};

/// Index of a cluster; the order over indices is the execution order.
struct ClusterId {
    std::uint32_t index = 0;
    auto operator<=>(const ClusterId&) const = default;
};

std::string to_string(ReplicaId id);
std::string to_string(ClusterId id);

class ConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Quorum arithmetic

/// Largest f with 3f + 1 <= cluster_size.
std::size_t fault_threshold(std::size_t cluster_size);

/// Size of a certifying quorum. Equals 2f + 1 whenever cluster_size = 3f + 1
/// and is raised to ceil((n + f + 1) / 2) otherwise so that any two quorums
/// share at least f + 1 members.
std::size_t quorum_size(std::size_t cluster_size);

/// The f + 1 smallest members under the global id order.
std::vector<ReplicaId> sender_set(const std::set<ReplicaId>& cluster, std::size_t f);

// ---------------------------------------------------------------------------
// Simulated signatures

struct SignatureToken {
    ReplicaId signer;
    Digest digest = 0;
    std::uint64_t mac = 0;
    auto operator<=>(const SignatureToken&) const = default;
};

class KeyRing;

/// Signing capability for exactly one identity. Only the simulator and the
/// adversary (for the nodes it controls) hold Signer objects.
class Signer {
public:
    Signer() = default;
    SignatureToken sign(Digest digest) const;
    ReplicaId id() const { return id_; }

private:
    friend class KeyRing;
    Signer(ReplicaId id, std::uint64_t key) : id_(id), key_(key) {}
    ReplicaId id_;
    std::uint64_t key_ = 0;
};

/// Per-run key material. Verification is public, signing requires a Signer.
class KeyRing {
public:
    explicit KeyRing(std::uint64_t seed = 0) : seed_(seed) {}
    Signer signer_for(ReplicaId id) const { return Signer(id, key(id)); }
    bool verify(const SignatureToken& token) const;

private:
    std::uint64_t key(ReplicaId id) const;
    std::uint64_t seed_;
};

struct Certificate {
    Digest subject = 0;
    std::vector<SignatureToken> signatures;
};

/// True iff every token verifies over the subject and is signed by a cluster
/// member, and the distinct signers number at least `required`.
bool validate_certificate(const Certificate& cert, const std::set<ReplicaId>& cluster,
                          std::size_t required, const KeyRing& keys);

/// Distinct-signer count of tokens that verify over `subject` and come from
/// `cluster`; invalid tokens are skipped.
std::size_t count_valid_signers(const std::vector<SignatureToken>& sigs, Digest subject,
                                const std::set<ReplicaId>& cluster, const KeyRing& keys);

// ---------------------------------------------------------------------------
// Operations

enum class TxnKind : std::uint8_t { Noop = 0, Read = 1, Write = 2 };

struct Txn {
    ReplicaId origin;
    std::uint64_t seq = 0;  ///< per-origin submission counter
    TxnKind kind = TxnKind::Noop;
    std::uint64_t key = 0;
    std::uint64_t value = 0;

    std::pair<std::uint64_t, std::uint64_t> id() const { return {origin.value, seq}; }
    bool operator==(const Txn&) const = default;
};

enum class ReconfigKind : std::uint8_t { Join = 0, Leave = 1 };

struct ReconfigRequest {
    ReconfigKind kind = ReconfigKind::Join;
    ReplicaId subject;
    ClusterId cluster;
    Round round = 0;
    SignatureToken signature;  ///< by `subject` over request_statement()

    Digest statement() const;
    bool operator==(const ReconfigRequest&) const = default;
};

/// Subject signature check shared by collection, dissemination and the
/// inter-cluster certificate validator.
class KeyRing;
bool request_signature_valid(const ReconfigRequest& req, const KeyRing& keys);

/// Deduplicated request set: at most one join and one leave per subject.
class RecsSet {
public:
    using Key = std::pair<ReplicaId, ReconfigKind>;

    bool insert(const ReconfigRequest& req);
    void merge(const RecsSet& other);
    void erase_all(const RecsSet& other);
    bool contains(ReplicaId subject, ReconfigKind kind) const;
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    const std::map<Key, ReconfigRequest>& items() const { return items_; }
    bool operator==(const RecsSet& o) const { return items_ == o.items_; }

private:
    std::map<Key, ReconfigRequest> items_;
};

struct Trans {
    ReplicaId origin;
    Txn txn;
    bool operator==(const Trans&) const = default;
};

struct Reconfig {
    RecsSet recs;
    bool operator==(const Reconfig&) const = default;
};

using Operation = std::variant<Trans, Reconfig>;

// ---------------------------------------------------------------------------
// Configuration

class Configuration {
public:
    Configuration() = default;
    Configuration(std::map<ClusterId, std::set<ReplicaId>> members, Round effective_round);

    /// Throws ConfigurationError when a cluster is empty or an id repeats.
    void validate() const;

    std::size_t cluster_count() const { return members_.size(); }
    const std::set<ReplicaId>& members(ClusterId j) const;
    std::vector<ReplicaId> sorted(ClusterId j) const;
    std::size_t size(ClusterId j) const { return members(j).size(); }
    std::size_t f(ClusterId j) const { return fault_threshold(size(j)); }
    std::size_t quorum(ClusterId j) const { return quorum_size(size(j)); }
    std::optional<ClusterId> cluster_of(ReplicaId id) const;
    bool contains(ClusterId j) const { return members_.count(j) != 0; }
    std::vector<ClusterId> clusters() const;
    Round effective_round() const { return effective_round_; }
    void set_effective_round(Round r) { effective_round_ = r; }

    void add(ClusterId j, ReplicaId id) { members_[j].insert(id); }
    void remove(ClusterId j, ReplicaId id) { members_[j].erase(id); }
    void set_members(ClusterId j, std::set<ReplicaId> m) { members_[j] = std::move(m); }

    const std::map<ClusterId, std::set<ReplicaId>>& all() const { return members_; }
    bool operator==(const Configuration&) const = default;

private:
    std::map<ClusterId, std::set<ReplicaId>> members_;
    Round effective_round_ = 1;
};

/// Round-robin leader: members sorted by id, index ts mod |C|.
ReplicaId leader_for(const std::set<ReplicaId>& members, LeaderTs ts);

}  // namespace hamava
