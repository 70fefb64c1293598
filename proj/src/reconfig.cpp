#include "hamava/reconfig.hpp"

#include <algorithm>

namespace hamava {

namespace {

std::string kind_name(ReconfigKind k) { return k == ReconfigKind::Join ? "join" : "leave"; }

}  // namespace

bool Collection::applicable(const ReconfigRequest& req, ClusterId cluster, const Configuration& config) {
    if (req.cluster != cluster) return false;
    const auto home = config.cluster_of(req.subject);
    return req.kind == ReconfigKind::Join ? !home.has_value() : home == cluster;
}

void Collection::begin_round(Env& env, ClusterId cluster, Round r, const Configuration& config) {
    recs_ = RecsSet{};
    sent_ = false;
    for (const auto& [key, req] : next_recs_.items()) {
        if (!applicable(req, cluster, config)) continue;
        recs_.insert(req);
        env.send(req.subject, Ack{cluster, config.members(cluster), r});
    }
    next_recs_ = RecsSet{};
}

void Collection::on_request(Env& env, ReplicaId from, const Request& m, ClusterId cluster, Round r,
                            const Configuration& config) {
    const auto& req = m.req;
    if (req.subject != from || !request_signature_valid(req, env.keys) || !applicable(req, cluster, config)) return;
    if (req.round != r) {
        env.send(from, RoundHint{r});
        return;
    }
    if (!sent_) {
        recs_.insert(req);
        env.send(from, Ack{cluster, config.members(cluster), r});
    } else {
        next_recs_.insert(req);
    }
}

RecsSet Collection::take_for_send() {
    sent_ = true;
    return recs_;
}

void Collection::forget(const RecsSet& executed) {
    recs_.erase_all(executed);
    next_recs_.erase_all(executed);
}

void Requester::start(Env& env, ReconfigKind kind, ClusterId target, std::vector<ReplicaId> contacts,
                      Round round) {
    kind_ = kind;
    target_ = target;
    contacts_ = std::move(contacts);
    std::sort(contacts_.begin(), contacts_.end());
    round_ = round;
    backoff_ = env.params.client_timeout;
    active_ = true;
    acked_ = false;
    acks_.clear();
    hints_.clear();
    send_all(env);
}

void Requester::send_all(Env& env) {
    ReconfigRequest req{kind_, env.self(), target_, round_, {}};
    req.signature = env.sign(req.statement());
    env.trace("request", req.statement(),
              Attrs{}("c", target_)("r", round_)("kind", kind_name(kind_))("subject", env.self()));
    for (auto to : contacts_) env.send(to, Request{req});
    env.set_timer(kClientTimer, 0, backoff_);
}

Round Requester::hinted_round() const {
    std::vector<Round> v;
    for (const auto& [id, r] : hints_) v.push_back(r);
    if (v.empty()) return round_;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

void Requester::on_ack(Env& env, ReplicaId from, const Ack& m) {
    if (!active_ || acked_ || m.cluster != target_ || !m.members.count(from)) return;
    auto& senders = acks_[{m.members, m.r}];
    senders.insert(from);
    std::size_t from_contacts = 0;
    for (auto id : senders)
        if (std::binary_search(contacts_.begin(), contacts_.end(), id)) ++from_contacts;
    // The membership in the Ack is trusted only once a correct contact vouches for it.
    if (senders.size() < quorum_size(m.members.size()) || from_contacts < fault_threshold(contacts_.size()) + 1)
        return;
    acked_ = true;
    env.cancel_timer(kClientTimer, 0);
    env.trace("ack_quorum", 0,
              Attrs{}("c", target_)("r", m.r)("kind", kind_name(kind_))("subject", env.self()));
}

void Requester::on_hint(Env& env, ReplicaId from, const RoundHint& m) {
    if (!active_ || acked_ || !std::binary_search(contacts_.begin(), contacts_.end(), from)) return;
    hints_[from] = m.r;
    const Round guess = hinted_round();
    if (guess == round_) return;
    round_ = guess;
    send_all(env);
}

void Requester::on_timer(Env& env) {
    if (!active_ || acked_) return;
    backoff_ *= 2;
    send_all(env);
}

void Requester::finish(Env& env) {
    if (!active_) return;
    active_ = false;
    env.cancel_timer(kClientTimer, 0);
}

}  // namespace hamava
