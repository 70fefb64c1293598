#include "hamava/brd.hpp"

namespace hamava {

namespace {

std::string contributor_list(const AttributedSet& set) {
    std::vector<ReplicaId> ids;
    for (const auto& [id, m] : set) ids.push_back(id);
    return join_ids(ids);
}

std::string recs_digest_list(const AttributedSet& set) {
    std::string out;
    for (const auto& [id, m] : set) {
        if (!out.empty()) out += ',';
        out += std::to_string(digest_of(m.recs));
    }
    return out.empty() ? "-" : out;
}

}  // namespace

BrdInstance::BrdInstance(ClusterId cluster, Round r, std::set<ReplicaId> members, ReplicaId leader, LeaderTs ts,
                         ReplicaHooks& hooks)
    : cluster_(cluster),
      r_(r),
      members_(std::move(members)),
      f_(fault_threshold(members_.size())),
      quorum_(quorum_size(members_.size())),
      leader_(leader),
      ts_(ts),
      hooks_(hooks) {}

bool recs_contribution_valid(ClusterId cluster, Round r, const std::set<ReplicaId>& members, ReplicaId sender,
                             const RecsMsg& m, const KeyRing& keys) {
    if (m.sender != sender || m.r != r || !members.count(sender) || m.sig.signer != sender ||
        m.sig.digest != recs_statement(cluster, r, digest_of(m.recs)) || !keys.verify(m.sig))
        return false;
    for (const auto& [key, req] : m.recs.items())
        if (req.cluster != cluster || !request_signature_valid(req, keys)) return false;
    return true;
}

bool BrdInstance::origin_valid(const AttributedSet& set, const KeyRing& keys) const {
    if (set.size() < quorum_) return false;
    for (const auto& [sender, m] : set)
        if (!recs_contribution_valid(cluster_, r_, members_, sender, m, keys)) return false;
    return true;
}

bool BrdInstance::cached_origin_valid(Digest d, const AttributedSet& set, const KeyRing& keys) {
    auto it = origin_cache_.find(d);
    if (it != origin_cache_.end()) return it->second;
    const bool ok = origin_valid(set, keys);
    origin_cache_[d] = ok;
    return ok;
}

bool BrdInstance::attests(const AttributedSet& set, const Attestation& att, const KeyRing& keys) const {
    if (!origin_valid(set, keys)) return false;
    const Digest d = set_digest(set);
    switch (static_cast<AttestationKind>(att.kind)) {
        case AttestationKind::Origin:
            return true;
        case AttestationKind::EchoQuorum:
            return count_valid_signers(att.sigs, echo_statement(cluster_, r_, att.ts, d), members_, keys) >=
                   quorum_;
        case AttestationKind::ReadyAmplified:
            return count_valid_signers(att.sigs, ready_statement(cluster_, r_, att.ts, d), members_, keys) >=
                   f_ + 1;
    }
    return false;
}

void BrdInstance::broadcast(Env& env, RecsMsg m) {
    if (my_m_ || halted_) return;
    my_m_ = std::move(m);
    env.trace("brd_broadcast", digest_of(my_m_->recs), Attrs{}("c", cluster_)("r", r_)("ts", ts_));
    if (!valid_) env.send(leader_, BrdContribution{r_, ts_, *my_m_});
    if (!delivered_) env.set_timer(kBrdTimer, r_, env.params.brd_timeout);
}

void BrdInstance::halt(Env& env) {
    halted_ = true;
    env.cancel_timer(kBrdTimer, r_);
}

void BrdInstance::report_to_leader(Env& env) {
    if (valid_)
        env.send(leader_, Valid{r_, ts_, valid_->set, valid_->att});
    else if (my_m_)
        env.send(leader_, BrdContribution{r_, ts_, *my_m_});
}

void BrdInstance::new_leader(Env& env, ReplicaId leader, LeaderTs ts) {
    if (ts <= ts_) return;
    ts_ = ts;
    leader_ = leader;
    echoed_ = false;
    agg_sent_ = false;
    high_valid_.reset();
    q_.clear();
    m_.clear();
    echoes_.erase(echoes_.begin(), echoes_.lower_bound(VoteKey{ts_, 0}));
    future_.erase(future_.begin(), future_.lower_bound(ts_));
    if (halted_) return;
    report_to_leader(env);
    if (my_m_ && !delivered_) env.set_timer(kBrdTimer, r_, env.params.brd_timeout);
    auto it = future_.find(ts_);
    if (it == future_.end()) return;
    auto replay = std::move(it->second);
    future_.erase(it);
    for (const auto& [from, m] : replay) handle(env, from, m);
}

bool BrdInstance::handle(Env& env, ReplicaId from, const Message& m) {
    auto defer = [&](LeaderTs ts) {
        if (ts <= ts_) return false;
        future_[ts].emplace_back(from, m);
        return true;
    };
    if (halted_) return std::holds_alternative<BrdContribution>(m) || std::holds_alternative<Agg>(m) ||
                        std::holds_alternative<Echo>(m) || std::holds_alternative<Ready>(m) ||
                        std::holds_alternative<Valid>(m);
    if (const auto* p = std::get_if<BrdContribution>(&m)) {
        if (!defer(p->ts)) on_contribution(env, from, *p);
    } else if (const auto* p = std::get_if<Valid>(&m)) {
        if (!defer(p->ts)) on_valid(env, from, *p);
    } else if (const auto* p = std::get_if<Agg>(&m)) {
        if (!defer(p->ts)) on_agg(env, from, *p);
    } else if (const auto* p = std::get_if<Echo>(&m)) {
        if (!defer(p->ts)) on_echo(env, from, *p);
    } else if (const auto* p = std::get_if<Ready>(&m)) {
        on_ready(env, from, *p);
    } else {
        return false;
    }
    return true;
}

void BrdInstance::on_contribution(Env& env, ReplicaId from, const BrdContribution& m) {
    if (m.ts != ts_ || m.r != r_ || env.self() != leader_ || q_.count(from)) return;
    if (!recs_contribution_valid(cluster_, r_, members_, from, m.m, env.keys)) return;
    q_.insert(from);
    m_[from] = m.m;
    try_agg(env);
}

void BrdInstance::on_valid(Env& env, ReplicaId from, const Valid& m) {
    if (m.ts != ts_ || m.r != r_ || env.self() != leader_ || !members_.count(from) || q_.count(from)) return;
    if (m.att.kind == static_cast<std::uint64_t>(AttestationKind::Origin) || !attests(m.set, m.att, env.keys))
        return;
    q_.insert(from);
    if (!high_valid_ || m.att.ts > high_valid_->att.ts) high_valid_ = Candidate{m.set, m.att};
    try_agg(env);
}

void BrdInstance::try_agg(Env& env) {
    if (agg_sent_ || q_.size() < quorum_) return;
    agg_sent_ = true;
    if (high_valid_)
        env.broadcast(members_, Agg{r_, ts_, high_valid_->set, high_valid_->att});
    else
        env.broadcast(members_,
                      Agg{r_, ts_, m_, Attestation{static_cast<std::uint64_t>(AttestationKind::Origin), ts_, {}}});
}

void BrdInstance::on_agg(Env& env, ReplicaId from, const Agg& m) {
    if (from != leader_ || m.ts != ts_ || m.r != r_ || echoed_) return;
    if (!attests(m.set, m.att, env.keys)) {
        env.trace("invalid_agg", set_digest(m.set), Attrs{}("c", cluster_)("r", r_)("ts", m.ts)("from", from));
        return;
    }
    const Digest d = set_digest(m.set);
    // A member holding an attested candidate only echoes that candidate or
    // one attested at a later epoch.
    if (valid_ && d != set_digest(valid_->set) &&
        (m.att.kind == static_cast<std::uint64_t>(AttestationKind::Origin) || m.att.ts < valid_->att.ts))
        return;
    echoed_ = true;
    env.broadcast(members_, Echo{r_, ts_, m.set, env.sign(echo_statement(cluster_, r_, ts_, d))});
}

void BrdInstance::on_echo(Env& env, ReplicaId from, const Echo& m) {
    if (m.ts != ts_ || m.r != r_ || !members_.count(from) || m.sig.signer != from) return;
    const Digest d = set_digest(m.set);
    if (m.sig.digest != echo_statement(cluster_, r_, m.ts, d) || !env.keys.verify(m.sig)) return;
    auto& v = echoes_[{m.ts, d}];
    if (v.sigs.empty()) v.set = m.set;
    v.sigs[from] = m.sig;
    if (v.sigs.size() < quorum_ || readied_.count(m.ts)) return;
    if (!cached_origin_valid(d, v.set, env.keys)) return;
    Attestation att{static_cast<std::uint64_t>(AttestationKind::EchoQuorum), m.ts, {}};
    for (const auto& [id, s] : v.sigs) att.sigs.push_back(s);
    send_ready(env, m.ts, v.set, std::move(att));
}

void BrdInstance::send_ready(Env& env, LeaderTs ts, const AttributedSet& set, Attestation att) {
    readied_.insert(ts);
    if (!valid_ || ts > valid_->att.ts) valid_ = Candidate{set, std::move(att)};
    const Digest d = set_digest(set);
    env.broadcast(members_, Ready{r_, ts, set, env.sign(ready_statement(cluster_, r_, ts, d))});
}

void BrdInstance::on_ready(Env& env, ReplicaId from, const Ready& m) {
    if (m.r != r_ || !members_.count(from) || m.sig.signer != from) return;
    const Digest d = set_digest(m.set);
    if (m.sig.digest != ready_statement(cluster_, r_, m.ts, d) || !env.keys.verify(m.sig)) return;
    auto& v = readies_[{m.ts, d}];
    if (v.sigs.empty()) v.set = m.set;
    v.sigs[from] = m.sig;
    if (v.sigs.size() < f_ + 1) return;
    if (!cached_origin_valid(d, v.set, env.keys)) return;
    if (!readied_.count(m.ts)) {
        Attestation att{static_cast<std::uint64_t>(AttestationKind::ReadyAmplified), m.ts, {}};
        for (const auto& [id, s] : v.sigs) att.sigs.push_back(s);
        send_ready(env, m.ts, v.set, std::move(att));
    }
    // A Ready quorum is a delivery certificate independently of our epoch.
    if (v.sigs.size() < quorum_ || delivered_) return;
    delivered_ = true;
    env.cancel_timer(kBrdTimer, r_);
    ReconfigProof proof{v.set, m.ts, {}};
    for (const auto& [id, s] : v.sigs) proof.ready_sigs.push_back(s);
    env.trace("brd_deliver", d,
              Attrs{}("c", cluster_)("r", r_)("ts", m.ts)("contributors", contributor_list(v.set))(
                  "recs", recs_digest_list(v.set)));
    hooks_.brd_deliver(env, v.set, proof);
}

void BrdInstance::on_timer(Env& env) {
    if (delivered_ || halted_) return;
    hooks_.complain(env, "brd_timeout");
}

}  // namespace hamava
