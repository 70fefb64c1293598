#include "hamava/intercluster.hpp"

#include "hamava/brd.hpp"

#include <algorithm>
#include <string>
#include <tuple>

namespace hamava {

namespace {

std::uint64_t remote_timer_param(Round r, ClusterId j) { return r * 1024 + j.index; }

}  // namespace

bool ops_certified(ClusterId j, Round r, const std::vector<Operation>& ops, const OpsCerts& certs,
                   const std::set<ReplicaId>& members, std::size_t batch_size, const KeyRing& keys) {
    if (ops.size() != batch_size + 1 || certs.trans.size() != batch_size || members.empty()) return false;
    const std::size_t q = quorum_size(members.size());
    for (std::size_t k = 0; k < batch_size; ++k) {
        const auto* t = std::get_if<Trans>(&ops[k]);
        if (!t || t->origin != t->txn.origin) return false;
        const auto& cert = certs.trans[k];
        if (count_valid_signers(cert.sigs, commit_statement(j, r, cert.ts, k, txn_digest(t->txn)), members, keys) <
            q)
            return false;
    }
    const auto* rc = std::get_if<Reconfig>(&ops.back());
    if (!rc) return false;
    const auto& proof = certs.reconfig;
    if (proof.set.size() < q || !(union_of(proof.set) == rc->recs)) return false;
    for (const auto& [sender, m] : proof.set)
        if (!recs_contribution_valid(j, r, members, sender, m, keys)) return false;
    return count_valid_signers(proof.ready_sigs, ready_statement(j, r, proof.ready_ts, set_digest(proof.set)),
                               members, keys) >= q;
}

void InterCluster::begin_round(ClusterId self_cluster, Round r, const Configuration& config,
                               const Configuration& prev) {
    self_ = self_cluster;
    r_ = r;
    config_ = config;
    prev_ = prev;
    batches_.clear();
    relayed_.clear();
    cn_.clear();
    complained_.clear();
    cs_.clear();
    for (auto it = rcn_.begin(); it != rcn_.end();) it = it->first.second + 1 < r ? rcn_.erase(it) : std::next(it);
    for (auto it = relayed_complaints_.begin(); it != relayed_complaints_.end();)
        it = std::get<1>(*it) + 1 < r ? relayed_complaints_.erase(it) : std::next(it);
}

const std::set<ReplicaId>& InterCluster::view(ClusterId j) const { return config_.members(j); }

const std::set<ReplicaId>& InterCluster::view_at(ClusterId j, Round r) const {
    return config_for(r).members(j);
}

void InterCluster::arm_timers(Env& env) {
    for (auto j : config_.clusters())
        if (j != self_ && !has(j)) env.set_timer(kRemoteTimer, remote_timer_param(r_, j), env.params.remote_timeout);
}

void InterCluster::stop_timers(Env& env) {
    for (auto j : config_.clusters())
        if (j != self_) env.cancel_timer(kRemoteTimer, remote_timer_param(r_, j));
}

void InterCluster::inter_broadcast(Env& env, Round r, const std::vector<Operation>& ops,
                                   const OpsCerts& certs) const {
    for (auto j : config_.clusters()) {
        if (j == self_) continue;
        const auto& members = view(j);
        for (auto to : sender_set(members, fault_threshold(members.size())))
            env.send(to, Inter{r, self_, ops, certs});
    }
}

void InterCluster::set_batch(Env& env, ClusterId j, Batch b) {
    if (has(j)) return;
    env.trace("inter_accept", ops_digest(b.ops), Attrs{}("c", self_)("from", j)("r", r_));
    batches_.emplace(j, std::move(b));
    if (j != self_) env.cancel_timer(kRemoteTimer, remote_timer_param(r_, j));
    cs_.erase(j);
}

void InterCluster::on_inter(Env& env, ReplicaId from, const Inter& m) {
    if (m.r != r_ || m.from == self_ || !config_.contains(m.from) || relayed_.count(m.from)) return;
    if (!view(m.from).count(from)) return;
    if (!ops_certified(m.from, m.r, m.ops, m.certs, view(m.from), env.params.batch_size, env.keys)) {
        env.trace("reject_inter", ops_digest(m.ops), Attrs{}("c", self_)("from", m.from)("r", m.r)("sender", from));
        return;
    }
    relayed_.insert(m.from);
    env.broadcast(config_.members(self_), Local{m.r, m.from, m.ops, m.certs});
}

void InterCluster::on_local(Env& env, ReplicaId from, const Local& m) {
    if (m.r != r_ || m.from == self_ || !config_.contains(m.from) || has(m.from)) return;
    if (!config_.members(self_).count(from)) return;
    if (!ops_certified(m.from, m.r, m.ops, m.certs, view(m.from), env.params.batch_size, env.keys)) return;
    set_batch(env, m.from, Batch{m.ops, m.certs});
}

void InterCluster::on_timer(Env& env, ClusterId j) {
    if (has(j) || complained_[j]) return;
    complained_[j] = true;
    const std::uint64_t c = cn_[j];
    env.trace("lcomplaint", 0, Attrs{}("c", self_)("target", j)("r", r_)("cn", c));
    env.broadcast(config_.members(self_), LComplaint{j, c, r_, env.sign(lcomplaint_statement(self_, j, c, r_))});
}

void InterCluster::on_lcomplaint(Env& env, ReplicaId from, const LComplaint& m) {
    if (m.r != r_ || m.target == self_ || !config_.contains(m.target) || has(m.target)) return;
    if (!config_.members(self_).count(from) || m.sig.signer != from ||
        m.sig.digest != lcomplaint_statement(self_, m.target, m.c, m.r) || !env.keys.verify(m.sig))
        return;
    if (m.c < cn_[m.target]) return;
    cs_[m.target][m.c][from] = m.sig;
    process_complaints(env, m.target);
}

void InterCluster::process_complaints(Env& env, ClusterId j) {
    const auto& members = config_.members(self_);
    const std::size_t f = fault_threshold(members.size());
    const std::size_t q = quorum_size(members.size());
    for (;;) {
        if (has(j)) return;
        const std::uint64_t c = cn_[j];
        auto& sigs = cs_[j][c];
        if (sigs.size() >= f + 1 && !complained_[j]) {
            complained_[j] = true;
            env.trace("lcomplaint", 0, Attrs{}("c", self_)("target", j)("r", r_)("cn", c)("cause", "amplify"));
            env.broadcast(members, LComplaint{j, c, r_, env.sign(lcomplaint_statement(self_, j, c, r_))});
        }
        if (sigs.size() < q) return;
        env.trace("lcomplaint_quorum", 0, Attrs{}("c", self_)("target", j)("r", r_)("cn", c));
        const auto senders = sender_set(members, f);
        if (std::find(senders.begin(), senders.end(), env.self()) != senders.end()) {
            RComplaint rc{c, self_, {}, r_};
            for (const auto& [id, s] : sigs) rc.sigs.push_back(s);
            const auto& remote = view(j);
            for (auto to : sender_set(remote, fault_threshold(remote.size()))) env.send(to, rc);
        }
        cs_[j].erase(c);
        cn_[j] = c + 1;
        complained_[j] = false;
        env.set_timer(kRemoteTimer, remote_timer_param(r_, j), env.params.remote_timeout);
    }
}

bool InterCluster::complaint_sigs_valid(const std::vector<SignatureToken>& sigs, ClusterId from, std::uint64_t c,
                                        Round r, const KeyRing& keys) const {
    const auto& members = view_at(from, r);
    return count_valid_signers(sigs, lcomplaint_statement(from, self_, c, r), members, keys) >=
           quorum_size(members.size());
}

void InterCluster::on_rcomplaint(Env& env, ReplicaId from, const RComplaint& m) {
    if (m.from == self_ || (m.r != r_ && m.r + 1 != r_)) return;
    if (!config_for(m.r).contains(m.from) || !view_at(m.from, m.r).count(from)) return;
    const auto key = std::make_tuple(m.from, m.r, m.c);
    if (relayed_complaints_.count(key)) return;
    if (!env.params.disable_rcn_check && m.c < rcn_[{m.from, m.r}]) return;
    if (!complaint_sigs_valid(m.sigs, m.from, m.c, m.r, env.keys)) return;
    relayed_complaints_.insert(key);
    env.broadcast(config_.members(self_), ComplaintRelay{m.c, m.from, m.sigs, m.r});
}

void InterCluster::on_relay(Env& env, ReplicaId from, const ComplaintRelay& m, const Election& election,
                            ReplicaHooks& hooks) {
    if (m.from == self_ || (m.r != r_ && m.r + 1 != r_)) return;
    if (!config_.members(self_).count(from) || !config_for(m.r).contains(m.from)) return;
    auto& rcn = rcn_[{m.from, m.r}];
    if (!env.params.disable_rcn_check && m.c < rcn) return;
    if (!complaint_sigs_valid(m.sigs, m.from, m.c, m.r, env.keys)) return;
    rcn = std::max(rcn, m.c + 1);
    const std::string rk = std::to_string(m.from.index) + ":" + std::to_string(m.r) + ":" + std::to_string(m.c);
    env.trace("rcomplaint_accept", 0, Attrs{}("c", self_)("from", m.from)("r", m.r)("cn", m.c)("rk", rk));
    if (env.now() - election.installed_at() > env.params.epsilon) hooks.complain(env, "remote", rk);
}

}  // namespace hamava
