#include "hamava/replica.hpp"

#include <algorithm>

namespace hamava {

namespace {

const char* mode_name(Replica::Mode m) {
    switch (m) {
        case Replica::Mode::Idle: return "idle";
        case Replica::Mode::Joining: return "joining";
        case Replica::Mode::Active: return "active";
        case Replica::Mode::Left: return "left";
    }
    return "?";
}

std::string fault_list(const Configuration& config) {
    std::string out;
    for (auto j : config.clusters()) {
        if (!out.empty()) out += ',';
        out += std::to_string(j.index) + ":" + std::to_string(config.f(j));
    }
    return out;
}

bool signed_by(const SignatureToken& sig, ReplicaId from, Digest statement, const KeyRing& keys) {
    return sig.signer == from && sig.digest == statement && keys.verify(sig);
}

}  // namespace

std::uint64_t apply_txn(KvState& state, const Txn& txn) {
    switch (txn.kind) {
        case TxnKind::Read: {
            auto it = state.store.find(txn.key);
            return it == state.store.end() ? 0 : it->second;
        }
        case TxnKind::Write:
            state.store[txn.key] = txn.value;
            return txn.value;
        case TxnKind::Noop:
            break;
    }
    return 0;
}

Replica::Replica(ReplicaId id, const KeyRing& keys, ProtocolParams params, const Configuration& initial)
    : id_(id), keys_(keys), signer_(keys.signer_for(id)), params_(params) {
    if (auto home = initial.cluster_of(id)) {
        mode_ = Mode::Active;
        cluster_ = *home;
        config_ = initial;
        prev_config_ = initial;
        election_ = Election(cluster_, config_.members(cluster_));
    }
    election_.on_change = [this](Env& env, ReplicaId leader, LeaderTs ts, std::string_view) {
        leader_changed(env, leader, ts);
    };
}

void Replica::start(NetContext& ctx) {
    if (mode_ != Mode::Active) return;
    with_env(ctx, [&](Env& env) { enter_round(env); });
}

void Replica::on_message(NetContext& ctx, ReplicaId from, const PacketPtr& p) {
    with_env(ctx, [&](Env& env) { route(env, from, p); });
}

void Replica::on_timer(NetContext& ctx, TimerTag tag) {
    with_env(ctx, [&](Env& env) {
        if (tag.kind == kClientTimer) {
            requester_.on_timer(env);
            return;
        }
        if (mode_ != Mode::Active) return;
        switch (tag.kind) {
            case kTobTimer:
                if (tag.param == r_) tob_->on_tob_timer(env);
                break;
            case kFillTimer:
                if (tag.param == r_) tob_->on_fill_timer(env);
                break;
            case kBrdTimer:
                if (tag.param == r_) brd_->on_timer(env);
                break;
            case kRemoteTimer:
                if (tag.param / 1024 == r_) ic_.on_timer(env, ClusterId{static_cast<std::uint32_t>(tag.param % 1024)});
                break;
            default:
                break;
        }
    });
}

void Replica::on_finish(NetContext& ctx) {
    Attrs a;
    a("mode", mode_name(mode_))("c", cluster_)("r", r_)("leader", election_.leader())("ts", election_.ts())(
        "active", std::uint64_t{mode_ == Mode::Active && active_})("pending", std::uint64_t{pool_.size()})(
        "joining", std::uint64_t{requester_.active()});
    ctx.trace("final", mode_ == Mode::Active ? digest_of(config_) : 0, std::move(a));
}

void Replica::submit(NetContext& ctx, TxnKind kind, std::uint64_t key, std::uint64_t value) {
    with_env(ctx, [&](Env& env) {
        const Txn t{id_, ++next_txn_seq_, kind, key, value};
        if (mode_ != Mode::Active) {
            env.trace("reject", txn_digest(t), Attrs{}("seq", t.seq)("mode", mode_name(mode_)));
            return;
        }
        env.trace("submit", txn_digest(t), Attrs{}("c", cluster_)("r", r_)("seq", t.seq));
        env.broadcast(config_.members(cluster_), TxnForward{t});
    });
}

void Replica::request_join(NetContext& ctx, ClusterId target, std::vector<ReplicaId> contacts) {
    with_env(ctx, [&](Env& env) {
        if (mode_ != Mode::Idle) return;
        mode_ = Mode::Joining;
        requester_.start(env, ReconfigKind::Join, target, std::move(contacts), 1);
    });
}

void Replica::request_leave(NetContext& ctx) {
    with_env(ctx, [&](Env& env) {
        if (mode_ != Mode::Active || requester_.active()) return;
        requester_.start(env, ReconfigKind::Leave, cluster_, config_.sorted(cluster_), r_);
    });
}

void Replica::complain(Env& env, std::string_view cause, std::string rk) {
    election_.complain(env, cause, rk, r_);
}

void Replica::drain(Env& env) {
    for (;;) {
        if (mode_ == Mode::Active && own_ && ic_.complete()) {
            execute(env);
            continue;
        }
        if (replay_.empty()) return;
        auto [from, p] = std::move(replay_.front());
        replay_.pop_front();
        route(env, from, p);
    }
}

void Replica::route(Env& env, ReplicaId from, const PacketPtr& p) {
    const Message& m = p->body;
    switch (mode_) {
        case Mode::Left:
            return;
        case Mode::Idle:
        case Mode::Joining:
            if (const auto* a = std::get_if<Ack>(&m))
                requester_.on_ack(env, from, *a);
            else if (const auto* h = std::get_if<RoundHint>(&m))
                requester_.on_hint(env, from, *h);
            else if (const auto* cs = std::get_if<CurrState>(&m))
                on_curr_state(env, from, *cs);
            else if (!std::holds_alternative<Request>(m))
                if (auto r = message_round(m)) future_[*r].emplace_back(from, p);
            return;
        case Mode::Active:
            route_active(env, from, p);
            return;
    }
}

void Replica::route_active(Env& env, ReplicaId from, const PacketPtr& p) {
    const Message& m = p->body;
    if (const auto* t = std::get_if<TxnForward>(&m)) {
        if (!config_.members(cluster_).count(from) || t->txn.origin != from) return;
        if (pool_.insert(t->txn)) {
            activate(env);
            tob_->offer(env);
        }
        return;
    }
    if (const auto* c = std::get_if<ElectComplaint>(&m)) return election_.on_complaint(env, from, *c, r_);
    if (const auto* req = std::get_if<Request>(&m)) {
        collection_.on_request(env, from, *req, cluster_, r_, config_);
        if (!collection_.recs().empty()) activate(env);
        return;
    }
    if (const auto* a = std::get_if<Ack>(&m)) return requester_.on_ack(env, from, *a);
    if (const auto* h = std::get_if<RoundHint>(&m)) return requester_.on_hint(env, from, *h);
    if (std::holds_alternative<CurrState>(m)) return;

    const auto round = message_round(m);
    if (!round) return;
    if (*round + 1 == r_) {
        if (const auto* rc = std::get_if<RComplaint>(&m)) return ic_.on_rcomplaint(env, from, *rc);
        if (const auto* cr = std::get_if<ComplaintRelay>(&m)) return ic_.on_relay(env, from, *cr, election_, *this);
    }
    if (*round > r_) {
        future_[*round].emplace_back(from, p);
        return;
    }
    if (*round < r_) {
        if (*round + 1 == r_ && prev_brd_ && prev_brd_->handle(env, from, m)) return;
        catch_up_reply(env, from, *round);
        return;
    }
    activate(env);
    route_round(env, from, m);
}

void Replica::route_round(Env& env, ReplicaId from, const Message& m) {
    const auto observe = [&](LeaderTs ts, const SignatureToken& sig, Digest statement) {
        if (signed_by(sig, from, statement, env.keys)) election_.observe(env, from, ts, r_);
    };
    if (const auto* p = std::get_if<Prepare>(&m)) {
        observe(p->ts, p->sig, prepare_statement(cluster_, r_, p->ts, p->seq, p->txn_digest));
    } else if (const auto* c = std::get_if<Commit>(&m)) {
        observe(c->ts, c->sig, commit_statement(cluster_, r_, c->ts, c->seq, txn_digest(c->txn)));
    } else if (const auto* e = std::get_if<Echo>(&m)) {
        observe(e->ts, e->sig, echo_statement(cluster_, r_, e->ts, set_digest(e->set)));
    } else if (const auto* rd = std::get_if<Ready>(&m)) {
        observe(rd->ts, rd->sig, ready_statement(cluster_, r_, rd->ts, set_digest(rd->set)));
    }
    if (tob_->handle(env, from, m)) return;
    if (brd_->handle(env, from, m)) return;
    if (const auto* i = std::get_if<Inter>(&m)) return ic_.on_inter(env, from, *i);
    if (const auto* l = std::get_if<Local>(&m)) return ic_.on_local(env, from, *l);
    if (const auto* cu = std::get_if<CatchUp>(&m)) {
        if (cu->c == cluster_) adopt_own_batch(env, *cu);
        return;
    }
    if (const auto* lc = std::get_if<LComplaint>(&m)) return ic_.on_lcomplaint(env, from, *lc);
    if (const auto* rc = std::get_if<RComplaint>(&m)) return ic_.on_rcomplaint(env, from, *rc);
    if (const auto* cr = std::get_if<ComplaintRelay>(&m)) return ic_.on_relay(env, from, *cr, election_, *this);
}

void Replica::catch_up_reply(Env& env, ReplicaId from, Round r) {
    if (!config_.members(cluster_).count(from) && !prev_config_.members(cluster_).count(from)) return;
    auto it = history_.find(r);
    if (it == history_.end() || !caught_up_.insert({from, r}).second) return;
    env.send(from, CatchUp{r, cluster_, it->second.ops, it->second.certs});
}

void Replica::adopt_own_batch(Env& env, const CatchUp& m) {
    if (own_ || !config_.members(cluster_).count(env.self())) return;
    if (!ops_certified(cluster_, r_, m.ops, m.certs, config_.members(cluster_), params_.batch_size, keys_)) return;
    for (std::size_t k = 0; k + 1 < m.ops.size(); ++k) pool_.mark_delivered(std::get<Trans>(m.ops[k]).txn);
    env.trace("catch_up", ops_digest(m.ops), Attrs{}("c", cluster_)("r", r_));
    tob_->halt(env);
    brd_->halt(env);
    own_batch_ready(env, RoundOps{m.ops, m.certs});
}

void Replica::activate(Env& env) {
    if (active_ || mode_ != Mode::Active) return;
    active_ = true;
    tob_->activate(env);
    ic_.arm_timers(env);
}

void Replica::tob_deliver(Env& env, std::uint64_t seq, const Txn& txn, const TransCert& cert) {
    if (own_) return;
    trans_.push_back(Trans{txn.origin, txn});
    trans_certs_.push_back(cert);
    pool_.mark_delivered(txn);
    env.trace("tob_deliver", txn_digest(txn),
              Attrs{}("c", cluster_)("r", r_)("seq", seq)("ts", cert.ts)("origin", txn.origin)("tseq", txn.seq));
    if (trans_.size() == params_.recs_threshold()) send_recs(env);
    check_stage_complete(env);
}

void Replica::send_recs(Env& env) {
    if (brd_->started()) return;
    RecsSet recs = collection_.take_for_send();
    const Digest d = digest_of(recs);
    brd_->broadcast(env, RecsMsg{id_, r_, std::move(recs), env.sign(recs_statement(cluster_, r_, d))});
}

void Replica::brd_deliver(Env& env, const AttributedSet& set, const ReconfigProof& proof) {
    if (own_) return;
    reconfig_.emplace(Reconfig{union_of(set)}, proof);
    check_stage_complete(env);
}

void Replica::check_stage_complete(Env& env) {
    if (own_ || trans_.size() < params_.batch_size || !reconfig_) return;
    RoundOps ro;
    ro.ops = trans_;
    ro.ops.emplace_back(reconfig_->first);
    ro.certs = OpsCerts{trans_certs_, reconfig_->second};
    own_batch_ready(env, std::move(ro));
}

void Replica::own_batch_ready(Env& env, RoundOps ro) {
    if (own_) return;
    own_ = std::move(ro);
    ic_.set_batch(env, cluster_, InterCluster::Batch{own_->ops, own_->certs});
    if (election_.leader() == id_) ic_.inter_broadcast(env, r_, own_->ops, own_->certs);
}

void Replica::leader_changed(Env& env, ReplicaId leader, LeaderTs ts) {
    if (mode_ != Mode::Active || !tob_) return;
    tob_->new_leader(env, leader, ts);
    brd_->new_leader(env, leader, ts);
    if (prev_brd_) prev_brd_->new_leader(env, leader, ts);
    if (leader != id_) return;
    if (own_) ic_.inter_broadcast(env, r_, own_->ops, own_->certs);
    if (prev_cache_.present() && prev_cache_.r + 1 == r_)
        ic_.inter_broadcast(env, prev_cache_.r, prev_cache_.ops, prev_cache_.certs);
}

void Replica::execute(Env& env) {
    const Configuration old = config_;
    Configuration next = config_;
    RecsSet executed;
    std::optional<Reconfig> mine;
    std::uint64_t ops = 0;
    for (auto j : old.clusters()) {
        std::vector<ReplicaId> joins, leaves;
        for (const auto& op : ic_.batches().at(j).ops) {
            ++ops;
            state_.log = chain(state_.log, digest_of(op));
            if (const auto* t = std::get_if<Trans>(&op)) {
                const std::uint64_t value = apply_txn(state_, t->txn);
                ++state_.applied;
                if (t->txn.origin == id_ && t->txn.kind != TxnKind::Noop)
                    env.trace("return", txn_digest(t->txn),
                              Attrs{}("c", cluster_)("r", r_)("seq", t->txn.seq)("value", value));
                continue;
            }
            const auto& rc = std::get<Reconfig>(op);
            executed.merge(rc.recs);
            if (j == cluster_) mine = rc;
            if (frozen_.count(j)) continue;
            for (const auto& [key, req] : rc.recs.items()) {
                if (req.kind == ReconfigKind::Join && !next.cluster_of(req.subject)) {
                    next.add(j, req.subject);
                    joins.push_back(req.subject);
                } else if (req.kind == ReconfigKind::Leave && next.cluster_of(req.subject) == j && next.size(j) > 1) {
                    next.remove(j, req.subject);
                    leaves.push_back(req.subject);
                }
            }
        }
        if (!joins.empty() || !leaves.empty())
            env.trace("reconfigure", 0, Attrs{}("c", j)("r", r_)("joins", join_ids(joins))("leaves", join_ids(leaves)));
    }
    next.set_effective_round(r_ + 1);
    collection_.forget(executed);
    history_[r_] = *own_;
    prev_cache_ = PrevRoundCache{r_, own_->ops, own_->certs};
    tob_->halt(env);
    if (brd_->delivered())
        prev_brd_ = std::move(brd_);
    else
        brd_->halt(env);
    ic_.stop_timers(env);
    prev_config_ = old;
    config_ = std::move(next);
    env.trace("execute", state_.log,
              Attrs{}("c", cluster_)("r", r_)("config", digest_of(config_))("state", digest_of(state_))(
                  "f", fault_list(config_))("leader", election_.leader())("ts", election_.ts())("ops", ops));

    if (mine) {
        std::set<ReplicaId> joiners;
        for (const auto& [key, req] : mine->recs.items())
            if (req.kind == ReconfigKind::Join && config_.members(cluster_).count(req.subject) &&
                !old.members(cluster_).count(req.subject))
                joiners.insert(req.subject);
        if (!joiners.empty()) {
            const CurrState cs{CurrStateBody{state_, config_, r_, cluster_, old.members(cluster_), own_->ops,
                                             own_->certs},
                               election_.ts()};
            for (auto p : joiners) env.send(p, cs);
        }
    }
    own_.reset();
    if (!config_.cluster_of(id_)) {
        mode_ = Mode::Left;
        active_ = false;
        requester_.finish(env);
        env.trace("left", 0, Attrs{}("c", cluster_)("r", r_));
        return;
    }
    const ReplicaId before = election_.leader();
    ++r_;
    election_.set_members(config_.members(cluster_));
    if (election_.leader() != before)
        env.trace("new_leader", 0,
                  Attrs{}("c", cluster_)("ts", election_.ts())("leader", election_.leader())("via", "members")(
                      "r", r_));
    enter_round(env);
}

void Replica::enter_round(Env& env) {
    const auto& members = config_.members(cluster_);
    tob_ = std::make_unique<TobInstance>(cluster_, r_, members, params_.batch_size, election_.leader(),
                                         election_.ts(), *this, pool_);
    brd_ = std::make_unique<BrdInstance>(cluster_, r_, members, election_.leader(), election_.ts(), *this);
    ic_.begin_round(cluster_, r_, config_, prev_config_);
    collection_.begin_round(env, cluster_, r_, config_);
    if (requester_.kind() == ReconfigKind::Leave) requester_.set_round(r_);
    trans_.clear();
    trans_certs_.clear();
    reconfig_.reset();
    own_.reset();
    active_ = false;
    constexpr Round kKeep = 8;
    history_.erase(history_.begin(), history_.lower_bound(r_ > kKeep ? r_ - kKeep : 0));
    for (auto it = caught_up_.begin(); it != caught_up_.end();)
        it = it->second + kKeep < r_ ? caught_up_.erase(it) : std::next(it);
    if (auto it = future_.find(r_); it != future_.end())
        for (auto& e : it->second) replay_.push_back(std::move(e));
    future_.erase(future_.begin(), future_.upper_bound(r_));
    if (leave_round_ && r_ >= *leave_round_ && !requester_.active()) {
        leave_round_.reset();
        requester_.start(env, ReconfigKind::Leave, cluster_, config_.sorted(cluster_), r_);
    }
    if (!pool_.empty() || !collection_.recs().empty() || r_ <= min_rounds_) activate(env);
}

void Replica::on_curr_state(Env& env, ReplicaId from, const CurrState& m) {
    if (mode_ != Mode::Joining) return;
    const auto& b = m.body;
    if (b.cluster != requester_.target() || !b.prev_members.count(from) || !b.config.contains(b.cluster) ||
        !b.config.members(b.cluster).count(id_))
        return;
    const Digest key = statement_digest("curr-state", b.state, b.config, b.r, b.cluster, b.prev_members, b.p_ops);
    auto& g = joins_[key];
    if (g.ts.empty()) {
        g.body = b;
        g.body.p_certs = OpsCerts{};
    }
    g.ts[from] = m.ts;
    g.certs[from] = b.p_certs;
    const auto& contacts = requester_.contacts();
    std::size_t vouched = 0;
    for (const auto& [id, ts] : g.ts)
        if (std::binary_search(contacts.begin(), contacts.end(), id)) ++vouched;
    if (g.ts.size() < quorum_size(b.prev_members.size()) || vouched < fault_threshold(contacts.size()) + 1) return;
    for (const auto& [id, certs] : g.certs)
        if (ops_certified(b.cluster, b.r, b.p_ops, certs, b.prev_members, params_.batch_size, keys_)) {
            const JoinGroup chosen = g;
            join(env, chosen, certs);
            return;
        }
}

void Replica::join(Env& env, const JoinGroup& g, const OpsCerts& certs) {
    const auto& b = g.body;
    cluster_ = b.cluster;
    config_ = b.config;
    prev_config_ = b.config;
    prev_config_.set_members(cluster_, b.prev_members);
    prev_config_.set_effective_round(b.r);
    state_ = b.state;
    r_ = b.r + 1;
    std::vector<LeaderTs> reported;
    for (const auto& [id, ts] : g.ts) reported.push_back(ts);
    std::sort(reported.rbegin(), reported.rend());
    const LeaderTs ts = reported[std::min(config_.f(cluster_), reported.size() - 1)];
    auto on_change = std::move(election_.on_change);
    election_ = Election(cluster_, config_.members(cluster_), ts);
    election_.adopt(ts, env.now());
    election_.on_change = std::move(on_change);
    prev_cache_ = PrevRoundCache{b.r, b.p_ops, certs};
    history_[b.r] = RoundOps{b.p_ops, certs};
    mode_ = Mode::Active;
    requester_.finish(env);
    joins_.clear();
    env.trace("joined", digest_of(config_),
              Attrs{}("c", cluster_)("r", r_)("ts", ts)("leader", election_.leader()));
    future_.erase(future_.begin(), future_.lower_bound(r_));
    enter_round(env);
}

}  // namespace hamava
