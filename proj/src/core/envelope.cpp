// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/envelope.hpp"

namespace bizur {

const char* instance_mode_name(InstanceMode mode) {
  switch (mode) {
    case InstanceMode::Normal: return "normal";
    case InstanceMode::Reconfig: return "reconfig";
    case InstanceMode::Draining: return "draining";
    case InstanceMode::Retired: return "retired";
  }
  return "?";
}

const char* kv_op_name(KvOp op) {
  switch (op) {
    case KvOp::Get: return "get";
    case KvOp::Set: return "set";
    case KvOp::Delete: return "delete";
    case KvOp::CasSet: return "cas_set";
    case KvOp::CasDelete: return "cas_delete";
    case KvOp::IterateKeys: return "iterate_keys";
    case KvOp::FetchBucket: return "fetch_bucket";
  }
  return "?";
}

bool is_mutation(KvOp op) {
  switch (op) {
    case KvOp::Set:
    case KvOp::Delete:
    case KvOp::CasSet:
    case KvOp::CasDelete:
      return true;
    default:
      return false;
  }
}

KvResponse KvResponse::make_value(std::string v) {
  KvResponse r;
  r.kind = Kind::Value;
  r.value = std::move(v);
  return r;
}
KvResponse KvResponse::make_absent() {
  KvResponse r;
  r.kind = Kind::Absent;
  return r;
}
KvResponse KvResponse::make_ok() {
  KvResponse r;
  r.kind = Kind::Ok;
  return r;
}
KvResponse KvResponse::make_cas_mismatch(std::optional<std::string> actual) {
  KvResponse r;
  r.kind = Kind::CasMismatch;
  r.actual = std::move(actual);
  return r;
}
KvResponse KvResponse::make_keys(std::vector<std::string> keys) {
  KvResponse r;
  r.kind = Kind::Keys;
  r.keys = std::move(keys);
  return r;
}
KvResponse KvResponse::make_not_a_leader(std::optional<ServerId> hint,
                                         bool attempted) {
  KvResponse r;
  r.kind = Kind::NotALeader;
  r.leader_hint = hint;
  r.attempted = attempted;
  return r;
}
KvResponse KvResponse::make_reconfig_error(InstanceDescriptor redirect) {
  KvResponse r;
  r.kind = Kind::ReconfigError;
  r.redirect = std::move(redirect);
  return r;
}
KvResponse KvResponse::make_bucket_data(std::shared_ptr<const Bucket> b) {
  KvResponse r;
  r.kind = Kind::BucketData;
  r.bucket = std::move(b);
  return r;
}

namespace {
struct TagVisitor {
  const char* operator()(const PleaseVote&) const { return "PleaseVote"; }
  const char* operator()(const AckVote&) const { return "AckVote"; }
  const char* operator()(const NackVote&) const { return "NackVote"; }
  const char* operator()(const ReplicaWrite&) const { return "ReplicaWrite"; }
  const char* operator()(const AckWrite&) const { return "AckWrite"; }
  const char* operator()(const NackWrite&) const { return "NackWrite"; }
  const char* operator()(const ReplicaRead& r) const {
    return r.validate_only ? "ReplicaReadValidate" : "ReplicaRead";
  }
  const char* operator()(const AckRead& a) const {
    return a.bucket ? "AckReadData" : "AckRead";
  }
  const char* operator()(const NackRead&) const { return "NackRead"; }
  const char* operator()(const ClientRequest&) const { return "ClientRequest"; }
  const char* operator()(const ClientResponse&) const {
    return "ClientResponse";
  }
  const char* operator()(const TriggerElection&) const {
    return "TriggerElection";
  }
  const char* operator()(const DrainCmd&) const { return "DrainCmd"; }
  const char* operator()(const DrainAck&) const { return "DrainAck"; }
  const char* operator()(const DescriptorUpdate&) const {
    return "DescriptorUpdate";
  }
  const char* operator()(const DescriptorAck&) const { return "DescriptorAck"; }
  const char* operator()(const CopyComplete&) const { return "CopyComplete"; }
  const char* operator()(const CopyCompleteAck&) const {
    return "CopyCompleteAck";
  }
};
}  // namespace

const char* payload_tag(const Payload& p) { return std::visit(TagVisitor{}, p); }

}  // namespace bizur
