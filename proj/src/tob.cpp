#include "hamava/tob.hpp"

#include <algorithm>

namespace hamava {

bool PendingPool::insert(const Txn& txn) {
    const Id id = txn.id();
    if (delivered_.count(id) || by_id_.count(id)) return false;
    const std::uint64_t slot = arrivals_++;
    by_id_[id] = slot;
    by_arrival_[slot] = txn;
    return true;
}

void PendingPool::mark_delivered(const Txn& txn) {
    const Id id = txn.id();
    delivered_.insert(id);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return;
    by_arrival_.erase(it->second);
    by_id_.erase(it);
}

std::vector<Txn> PendingPool::ordered() const {
    std::vector<Txn> out;
    out.reserve(by_arrival_.size());
    for (const auto& [slot, txn] : by_arrival_) out.push_back(txn);
    return out;
}

Txn PendingPool::next_noop(ReplicaId origin) {
    return Txn{origin, (std::uint64_t{1} << 63) | noops_++, TxnKind::Noop, 0, 0};
}

TobInstance::TobInstance(ClusterId cluster, Round r, std::set<ReplicaId> members, std::size_t batch_size,
                         ReplicaId leader, LeaderTs ts, ReplicaHooks& hooks, PendingPool& pool)
    : cluster_(cluster),
      r_(r),
      members_(std::move(members)),
      f_(fault_threshold(members_.size())),
      quorum_(quorum_size(members_.size())),
      batch_(batch_size),
      leader_(leader),
      ts_(ts),
      hooks_(hooks),
      pool_(pool) {}

void TobInstance::activate(Env& env) {
    if (active_) return;
    active_ = true;
    send_view_report(env);
    arm_tob_timer(env);
}

void TobInstance::halt(Env& env) {
    halted_ = true;
    env.cancel_timer(kTobTimer, r_);
    env.cancel_timer(kFillTimer, r_);
}

void TobInstance::arm_tob_timer(Env& env) {
    if (complete() || halted_) {
        env.cancel_timer(kTobTimer, r_);
        return;
    }
    env.set_timer(kTobTimer, r_, env.params.tob_timeout);
}

void TobInstance::new_leader(Env& env, ReplicaId leader, LeaderTs ts) {
    if (ts <= ts_) return;
    ts_ = ts;
    leader_ = leader;
    view_ready_ = false;
    constraints_.clear();
    accepted_.clear();
    held_.clear();
    commit_sent_.clear();
    reports_.clear();
    new_view_sent_ = false;
    assigned_.clear();
    fill_expired_ = false;
    fill_armed_ = false;
    env.cancel_timer(kFillTimer, r_);
    future_.erase(future_.begin(), future_.lower_bound(ts_));
    if (!active_) return;
    send_view_report(env);
    arm_tob_timer(env);
    auto it = future_.find(ts_);
    if (it == future_.end()) return;
    auto replay = std::move(it->second);
    future_.erase(it);
    for (const auto& [from, m] : replay) handle(env, from, m);
}

void TobInstance::send_view_report(Env& env) {
    std::vector<TobLock> locks;
    locks.reserve(locks_.size());
    for (const auto& [seq, l] : locks_) locks.push_back(l);
    const Digest stmt = view_report_statement(cluster_, r_, ts_, locks);
    env.send(leader_, ViewReport{r_, ts_, std::move(locks), env.sign(stmt)});
}

bool TobInstance::handle(Env& env, ReplicaId from, const Message& m) {
    // Messages for a later epoch wait until we get there.
    auto defer = [&](LeaderTs ts) {
        if (ts <= ts_) return false;
        future_[ts].emplace_back(from, m);
        return true;
    };
    if (const auto* p = std::get_if<Propose>(&m)) {
        if (!defer(p->ts)) on_propose(env, from, *p);
    } else if (const auto* p = std::get_if<Prepare>(&m)) {
        on_prepare(env, from, *p);
    } else if (const auto* p = std::get_if<Commit>(&m)) {
        on_commit(env, from, *p);
    } else if (const auto* p = std::get_if<ViewReport>(&m)) {
        if (!defer(p->ts)) on_view_report(env, from, *p);
    } else if (const auto* p = std::get_if<NewView>(&m)) {
        if (!defer(p->ts)) on_new_view(env, from, *p);
    } else {
        return false;
    }
    return true;
}

bool TobInstance::lock_valid(const TobLock& l, const KeyRing& keys) const {
    if (l.seq >= batch_) return false;
    const Digest d = txn_digest(l.txn);
    if (l.evidence == static_cast<std::uint64_t>(LockEvidence::PrepareQuorum))
        return count_valid_signers(l.sigs, prepare_statement(cluster_, r_, l.ts, l.seq, d), members_, keys) >=
               quorum_;
    if (l.evidence == static_cast<std::uint64_t>(LockEvidence::CommitAmplified))
        return count_valid_signers(l.sigs, commit_statement(cluster_, r_, l.ts, l.seq, d), members_, keys) >=
               f_ + 1;
    return false;
}

bool TobInstance::report_valid(const ViewReport& vr, const KeyRing& keys) const {
    if (vr.r != r_ || !members_.count(vr.sig.signer) || !keys.verify(vr.sig) ||
        vr.sig.digest != view_report_statement(cluster_, r_, vr.ts, vr.locks))
        return false;
    std::set<std::uint64_t> seen;
    for (const auto& l : vr.locks)
        if (l.ts > vr.ts || !seen.insert(l.seq).second || !lock_valid(l, keys)) return false;
    return true;
}

void TobInstance::on_view_report(Env& env, ReplicaId from, const ViewReport& m) {
    if (m.ts != ts_ || env.self() != leader_ || m.sig.signer != from || new_view_sent_) return;
    if (!report_valid(m, env.keys)) return;
    reports_[from] = m;
    if (reports_.size() < quorum_) return;
    new_view_sent_ = true;
    NewView nv{r_, ts_, {}};
    for (const auto& [id, vr] : reports_) nv.reports.push_back(vr);
    env.broadcast(members_, std::move(nv));
}

void TobInstance::on_new_view(Env& env, ReplicaId from, const NewView& m) {
    if (from != leader_ || m.ts != ts_ || view_ready_) return;
    std::set<ReplicaId> signers;
    std::map<std::uint64_t, const TobLock*> best;
    for (const auto& vr : m.reports) {
        if (vr.ts != ts_ || !report_valid(vr, env.keys)) return;
        signers.insert(vr.sig.signer);
        for (const auto& l : vr.locks) {
            auto& b = best[l.seq];
            if (!b || l.ts > b->ts) b = &l;
        }
    }
    if (signers.size() < quorum_) return;
    view_ready_ = true;
    for (const auto& [seq, l] : best) constraints_[seq] = l->txn;
    if (env.self() == leader_) propose_all(env);
    auto held = std::move(held_);
    held_.clear();
    for (const auto& [f, p] : held) on_propose(env, f, p);
}

void TobInstance::offer(Env& env) {
    if (active_ && !halted_ && env.self() == leader_ && view_ready_) propose_all(env);
}

void TobInstance::on_fill_timer(Env& env) {
    fill_armed_ = false;
    fill_expired_ = true;
    if (env.self() == leader_ && view_ready_) propose_all(env);
}

void TobInstance::propose_all(Env& env) {
    std::set<PendingPool::Id> used;
    for (const auto& [seq, t] : constraints_) used.insert(t.id());
    for (const auto& [seq, t] : assigned_) used.insert(t.id());
    const auto fresh = pool_.ordered();
    std::size_t next_fresh = 0;
    for (std::uint64_t seq = 0; seq < batch_; ++seq) {
        if (assigned_.count(seq)) continue;
        std::optional<Txn> pick;
        if (auto c = constraints_.find(seq); c != constraints_.end()) {
            pick = c->second;
        } else {
            while (next_fresh < fresh.size() && used.count(fresh[next_fresh].id())) ++next_fresh;
            if (next_fresh < fresh.size()) {
                pick = fresh[next_fresh++];
            } else if (fill_expired_) {
                pick = pool_.next_noop(env.self());
            }
        }
        if (!pick) continue;
        used.insert(pick->id());
        assigned_[seq] = *pick;
        env.broadcast(members_, Propose{r_, ts_, seq, *pick});
    }
    if (assigned_.size() < batch_ && !fill_expired_ && !fill_armed_) {
        fill_armed_ = true;
        env.set_timer(kFillTimer, r_, env.params.fill_timeout);
    }
}

void TobInstance::on_propose(Env& env, ReplicaId from, const Propose& m) {
    if (from != leader_ || m.ts != ts_ || m.r != r_ || m.seq >= batch_) return;
    if (!view_ready_) {
        held_.emplace_back(from, m);
        return;
    }
    if (accepted_.count(m.seq)) return;
    if (auto c = constraints_.find(m.seq); c != constraints_.end() && !(c->second == m.txn)) return;
    accepted_[m.seq] = m.txn;
    const Digest d = txn_digest(m.txn);
    env.broadcast(members_, Prepare{r_, ts_, m.seq, d, env.sign(prepare_statement(cluster_, r_, ts_, m.seq, d))});
    check_prepared(env, m.seq);
}

void TobInstance::on_prepare(Env& env, ReplicaId from, const Prepare& m) {
    if (m.r != r_ || m.seq >= batch_ || !members_.count(from) || m.sig.signer != from ||
        m.sig.digest != prepare_statement(cluster_, r_, m.ts, m.seq, m.txn_digest) || !env.keys.verify(m.sig))
        return;
    prepares_[{m.ts, m.seq, m.txn_digest}][from] = m.sig;
    if (m.ts == ts_) check_prepared(env, m.seq);
}

void TobInstance::check_prepared(Env& env, std::uint64_t seq) {
    if (commit_sent_.count(seq)) return;
    auto a = accepted_.find(seq);
    if (a == accepted_.end()) return;
    auto it = prepares_.find({ts_, seq, txn_digest(a->second)});
    if (it == prepares_.end() || it->second.size() < quorum_) return;
    std::vector<SignatureToken> sigs;
    for (const auto& [id, s] : it->second) sigs.push_back(s);
    lock(seq, a->second, LockEvidence::PrepareQuorum, std::move(sigs));
    send_commit(env, seq, a->second);
}

void TobInstance::lock(std::uint64_t seq, const Txn& txn, LockEvidence ev, std::vector<SignatureToken> sigs) {
    auto it = locks_.find(seq);
    if (it != locks_.end() && it->second.ts >= ts_) return;
    locks_[seq] = TobLock{seq, ts_, txn, static_cast<std::uint64_t>(ev), std::move(sigs)};
}

void TobInstance::send_commit(Env& env, std::uint64_t seq, const Txn& txn) {
    commit_sent_.insert(seq);
    const Digest d = txn_digest(txn);
    env.broadcast(members_, Commit{r_, ts_, seq, txn, env.sign(commit_statement(cluster_, r_, ts_, seq, d))});
}

void TobInstance::on_commit(Env& env, ReplicaId from, const Commit& m) {
    if (m.r != r_ || m.seq >= batch_ || !members_.count(from) || m.sig.signer != from) return;
    const Digest d = txn_digest(m.txn);
    if (m.sig.digest != commit_statement(cluster_, r_, m.ts, m.seq, d) || !env.keys.verify(m.sig)) return;
    auto& entry = commits_[{m.ts, m.seq, d}];
    entry.first = m.txn;
    entry.second[from] = m.sig;
    const auto& votes = entry.second;
    if (m.ts == ts_ && votes.size() >= f_ + 1 && !commit_sent_.count(m.seq) && !halted_) {
        std::vector<SignatureToken> sigs;
        for (const auto& [id, s] : votes) sigs.push_back(s);
        lock(m.seq, m.txn, LockEvidence::CommitAmplified, std::move(sigs));
        send_commit(env, m.seq, m.txn);
    }
    // A commit quorum decides the slot whatever our current epoch is.
    if (votes.size() >= quorum_ && !decided_.count(m.seq)) {
        TransCert cert{m.ts, {}};
        for (const auto& [id, s] : votes) cert.sigs.push_back(s);
        decided_.emplace(m.seq, std::make_pair(m.txn, std::move(cert)));
        deliver_ready(env);
    }
}

void TobInstance::deliver_ready(Env& env) {
    bool progressed = false;
    while (!halted_ && next_deliver_ < batch_) {
        auto it = decided_.find(next_deliver_);
        if (it == decided_.end()) break;
        const std::uint64_t seq = next_deliver_++;
        progressed = true;
        hooks_.tob_deliver(env, seq, it->second.first, it->second.second);
        if (halted_) return;
    }
    if (progressed && active_) arm_tob_timer(env);
}

void TobInstance::on_tob_timer(Env& env) {
    if (complete() || halted_) return;
    hooks_.complain(env, "tob_timeout");
}

}  // namespace hamava
