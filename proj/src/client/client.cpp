// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/client/client.hpp"

#include "bizur/assert.hpp"
#include "bizur/hash.hpp"

namespace bizur {

ClientActor::ClientActor(sim::Transport& transport, ServerId self,
                         uint32_t index,
                         std::vector<InstanceDescriptor> shards,
                         RouterOptions opt)
    : transport_(transport), self_(self), index_(index) {
  BIZUR_ASSERT(!shards.empty(), "client needs at least one shard");
  routers_.reserve(shards.size());
  for (auto& desc : shards)
    routers_.push_back(
        std::make_unique<RequestRouter>(transport_, self_, desc, opt));
}

uint32_t ClientActor::shard_of(const std::string& key) const {
  return hash_key(key, static_cast<uint32_t>(routers_.size()));
}

void ClientActor::submit(KvRequest req, std::function<void(SubmitResult)> done) {
  // The route must be taken off req before the move; argument evaluation
  // order would otherwise be free to empty the key first.
  uint32_t shard = shard_of(req.key);
  submit_to_shard(shard, std::move(req), std::move(done));
}

void ClientActor::submit_to_shard(uint32_t shard, KvRequest req,
                                  std::function<void(SubmitResult)> done) {
  BIZUR_ASSERT(shard < routers_.size(), "shard out of range");
  routers_[shard]->submit(std::move(req), std::move(done));
}

uint64_t ClientActor::elections_triggered() const {
  uint64_t n = 0;
  for (const auto& r : routers_) n += r->elections_triggered();
  return n;
}

void ClientActor::on_envelope(Envelope env) {
  if (std::holds_alternative<ClientResponse>(env.payload)) {
    for (auto& r : routers_)
      if (r->on_envelope(env)) return;
    return;  // response to a finished attempt
  }
  if (auto* upd = std::get_if<DescriptorUpdate>(&env.payload)) {
    if (upd->desc.shard < routers_.size())
      routers_[upd->desc.shard]->retarget(upd->desc);
    transport_.send(Envelope{env.msg_id, self_, env.from, DescriptorAck{}});
    return;
  }
}

void ClientActor::start_workload(checker::ClientScript script,
                                 checker::History* history, SimTime stop_at) {
  script_ = std::move(script);
  history_ = history;
  stop_at_ = stop_at;
  workload_running_ = true;
  issue_next();
}

namespace {
checker::HOp to_hop(KvOp op) {
  switch (op) {
    case KvOp::Get: return checker::HOp::Get;
    case KvOp::Set: return checker::HOp::Set;
    case KvOp::Delete: return checker::HOp::Delete;
    case KvOp::CasSet: return checker::HOp::CasSet;
    case KvOp::CasDelete: return checker::HOp::CasDelete;
    default: BIZUR_ASSERT(false, "op not recordable"); return checker::HOp::Get;
  }
}
}  // namespace

void ClientActor::issue_next() {
  if (transport_.now() >= stop_at_) {
    workload_running_ = false;
    return;
  }
  checker::ScriptOp sop = script_->next();
  KvRequest req;
  req.op = sop.op;
  req.key = sop.key;
  req.value = sop.value;
  if (req.op == KvOp::CasSet || req.op == KvOp::CasDelete) {
    auto it = last_observed_.find(req.key);
    req.expected = it != last_observed_.end() ? it->second : std::nullopt;
  }
  uint64_t op_id = history_->invoke(transport_.now(), index_, to_hop(req.op),
                                    req.key, req.value, req.expected);
  submit(req, [this, op_id, req](SubmitResult r) {
    record_result(op_id, req, r);
    issue_next();
  });
}

void ClientActor::record_result(uint64_t op_id, const KvRequest& req,
                                const SubmitResult& r) {
  using checker::Outcome;
  SimTime now = transport_.now();
  switch (r.status) {
    case SubmitStatus::Ok:
      switch (r.response.kind) {
        case KvResponse::Kind::Value:
          history_->respond(op_id, now, Outcome::value_of(r.response.value));
          last_observed_[req.key] = r.response.value;
          return;
        case KvResponse::Kind::Absent:
          history_->respond(op_id, now, Outcome::absent());
          last_observed_[req.key] = std::nullopt;
          return;
        case KvResponse::Kind::Ok:
          history_->respond(op_id, now, Outcome::ok());
          if (req.op == KvOp::Set || req.op == KvOp::CasSet)
            last_observed_[req.key] = req.value;
          else
            last_observed_[req.key] = std::nullopt;
          return;
        case KvResponse::Kind::CasMismatch:
          history_->respond(op_id, now,
                            Outcome::cas_mismatch(r.response.actual));
          last_observed_[req.key] = r.response.actual;
          return;
        default:
          BIZUR_ASSERT(false, "unexpected response kind for keyed op");
          return;
      }
    case SubmitStatus::Indeterminate:
      history_->respond(op_id, now, Outcome::indeterminate());
      last_observed_.erase(req.key);
      return;
    case SubmitStatus::RetriesExhausted:
      history_->respond(op_id, now, Outcome::failed_clean());
      return;
    case SubmitStatus::Invalid:
      BIZUR_ASSERT(false, "workload produced an invalid request");
      return;
  }
}

}  // namespace bizur
