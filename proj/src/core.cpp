#include "hamava/core.hpp"

#include "hamava/codec.hpp"

#include <algorithm>
#include <cstdio>

namespace hamava {

std::string to_string(ReplicaId id) { return "n" + std::to_string(id.value); }
std::string to_string(ClusterId id) { return "c" + std::to_string(id.index); }

std::string hex(Digest d) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

std::size_t fault_threshold(std::size_t cluster_size) {
    if (cluster_size == 0) throw ConfigurationError("cluster size must be at least 1");
    return (cluster_size - 1) / 3;
}

std::size_t quorum_size(std::size_t cluster_size) {
    const std::size_t f = fault_threshold(cluster_size);
    return std::max(2 * f + 1, (cluster_size + f + 2) / 2);
}

std::vector<ReplicaId> sender_set(const std::set<ReplicaId>& cluster, std::size_t f) {
    if (cluster.size() < f + 1) throw ConfigurationError("cluster smaller than f + 1");
    return {cluster.begin(), std::next(cluster.begin(), static_cast<std::ptrdiff_t>(f + 1))};
}

SignatureToken Signer::sign(Digest digest) const {
    return SignatureToken{id_, digest, mix64(key_ ^ mix64(digest))};
}

std::uint64_t KeyRing::key(ReplicaId id) const {
    return mix64(seed_ ^ mix64(id.value * 0x2545f4914f6cdd1dULL + 0x51));
}

bool KeyRing::verify(const SignatureToken& token) const {
    return token.mac == mix64(key(token.signer) ^ mix64(token.digest));
}

bool validate_certificate(const Certificate& cert, const std::set<ReplicaId>& cluster,
                          std::size_t required, const KeyRing& keys) {
    std::set<ReplicaId> signers;
    for (const auto& t : cert.signatures) {
        if (t.digest != cert.subject || !keys.verify(t) || !cluster.count(t.signer)) return false;
        signers.insert(t.signer);
    }
    return signers.size() >= required;
}

std::size_t count_valid_signers(const std::vector<SignatureToken>& sigs, Digest subject,
                                const std::set<ReplicaId>& cluster, const KeyRing& keys) {
    std::set<ReplicaId> signers;
    for (const auto& t : sigs)
        if (t.digest == subject && cluster.count(t.signer) && keys.verify(t)) signers.insert(t.signer);
    return signers.size();
}

Digest ReconfigRequest::statement() const {
    return statement_digest("reconfig-request", static_cast<std::uint64_t>(kind), subject, cluster,
                            round);
}

bool request_signature_valid(const ReconfigRequest& req, const KeyRing& keys) {
    return req.signature.signer == req.subject && req.signature.digest == req.statement() &&
           keys.verify(req.signature);
}

bool RecsSet::insert(const ReconfigRequest& req) {
    return items_.emplace(Key{req.subject, req.kind}, req).second;
}

void RecsSet::merge(const RecsSet& other) {
    for (const auto& [k, v] : other.items_) items_.emplace(k, v);
}

void RecsSet::erase_all(const RecsSet& other) {
    for (const auto& [k, v] : other.items_) items_.erase(k);
}

bool RecsSet::contains(ReplicaId subject, ReconfigKind kind) const {
    return items_.count(Key{subject, kind}) != 0;
}

Configuration::Configuration(std::map<ClusterId, std::set<ReplicaId>> members, Round effective_round)
    : members_(std::move(members)), effective_round_(effective_round) {}

void Configuration::validate() const {
    if (members_.empty()) throw ConfigurationError("configuration has no clusters");
    std::set<ReplicaId> seen;
    std::uint32_t expect = 0;
    for (const auto& [j, m] : members_) {
        if (j.index != expect++) throw ConfigurationError("cluster indices must be dense from 0");
        if (m.empty()) throw ConfigurationError(to_string(j) + " is empty");
        for (auto id : m)
            if (!seen.insert(id).second)
                throw ConfigurationError(to_string(id) + " appears in more than one cluster");
    }
}

const std::set<ReplicaId>& Configuration::members(ClusterId j) const {
    static const std::set<ReplicaId> empty;
    auto it = members_.find(j);
    return it == members_.end() ? empty : it->second;
}

std::vector<ReplicaId> Configuration::sorted(ClusterId j) const {
    const auto& m = members(j);
    return {m.begin(), m.end()};
}

std::optional<ClusterId> Configuration::cluster_of(ReplicaId id) const {
    for (const auto& [j, m] : members_)
        if (m.count(id)) return j;
    return std::nullopt;
}

std::vector<ClusterId> Configuration::clusters() const {
    std::vector<ClusterId> out;
    for (const auto& [j, m] : members_) out.push_back(j);
    return out;
}

ReplicaId leader_for(const std::set<ReplicaId>& members, LeaderTs ts) {
    if (members.empty()) throw ConfigurationError("leader of an empty cluster");
    return *std::next(members.begin(), static_cast<std::ptrdiff_t>(ts % members.size()));
}

}  // namespace hamava
