// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bizur/reconfig/descriptor.hpp"
#include "bizur/types.hpp"

namespace bizur {

// ---- protocol messages -----------------------------------------------------

struct PleaseVote {
  ElectId elect_id = 0;
  ServerId candidate;
};
struct AckVote {};
struct NackVote {};

struct ReplicaWrite {
  std::shared_ptr<const Bucket> bucket;
};
struct AckWrite {};
struct NackWrite {};

struct ReplicaRead {
  uint32_t index = 0;
  ElectId elect_id = 0;
  // Leadership validation only: the replica acks without bucket content.
  bool validate_only = false;
};
struct AckRead {
  std::shared_ptr<const Bucket> bucket;  // null on validation-only acks
};
struct NackRead {};

// ---- client-facing messages ------------------------------------------------

enum class KvOp {
  Get,
  Set,
  Delete,
  CasSet,
  CasDelete,
  IterateKeys,
  FetchBucket,  // internal: whole-bucket read used by reconfiguration copy
};

const char* kv_op_name(KvOp op);
bool is_mutation(KvOp op);

struct KvRequest {
  KvOp op = KvOp::Get;
  std::string key;
  std::string value;
  // Conditional mutations: nullopt means "expect the key to be absent".
  std::optional<std::string> expected;
  uint32_t index = 0;     // FetchBucket only
  bool internal = false;  // reconfiguration copy traffic, exempt from draining
  InstanceId epoch = 0;   // sender's view of the instance epoch
};

struct KvResponse {
  enum class Kind {
    Value,
    Absent,
    Ok,
    CasMismatch,
    Keys,
    NotALeader,
    ReconfigError,
    BucketData,
  };

  Kind kind = Kind::Ok;
  std::string value;                          // Value
  std::optional<std::string> actual;          // CasMismatch (nullopt: absent)
  std::vector<std::string> keys;              // Keys (sorted)
  std::optional<ServerId> leader_hint;        // NotALeader
  // NotALeader: true when the server may already have replicated the
  // mutation before losing its majority; the caller must treat the
  // operation as indeterminate instead of retrying it.
  bool attempted = false;
  std::optional<InstanceDescriptor> redirect;  // ReconfigError
  std::shared_ptr<const Bucket> bucket;        // BucketData

  static KvResponse make_value(std::string v);
  static KvResponse make_absent();
  static KvResponse make_ok();
  static KvResponse make_cas_mismatch(std::optional<std::string> actual);
  static KvResponse make_keys(std::vector<std::string> keys);
  static KvResponse make_not_a_leader(std::optional<ServerId> hint,
                                      bool attempted);
  static KvResponse make_reconfig_error(InstanceDescriptor redirect);
  static KvResponse make_bucket_data(std::shared_ptr<const Bucket> b);
};

struct ClientRequest {
  KvRequest req;
};
struct ClientResponse {
  KvResponse resp;
};

// Client-initiated request that a server start a new election.
struct TriggerElection {};

// ---- reconfiguration control messages --------------------------------------

struct DrainCmd {
  InstanceDescriptor successor;
};
struct DrainAck {};

// Descriptor publication: epoch, shard and member list, pushed to clients.
struct DescriptorUpdate {
  InstanceDescriptor desc;
};
struct DescriptorAck {};

struct CopyComplete {
  uint32_t shard = 0;
  InstanceId instance_id = 0;
};
struct CopyCompleteAck {};

// ---- envelope ---------------------------------------------------------------

using Payload =
    std::variant<PleaseVote, AckVote, NackVote, ReplicaWrite, AckWrite,
                 NackWrite, ReplicaRead, AckRead, NackRead, ClientRequest,
                 ClientResponse, TriggerElection, DrainCmd, DrainAck,
                 DescriptorUpdate, DescriptorAck, CopyComplete,
                 CopyCompleteAck>;

// One routed message. Acks and nacks carry the msg_id of the request they
// answer; a broadcast round shares one msg_id across its targets.
struct Envelope {
  uint64_t msg_id = 0;
  ServerId from;
  ServerId to;
  Payload payload;
};

// Stable short name used for traces and per-kind network statistics.
// AckRead splits into "AckRead" / "AckReadData" depending on payload.
const char* payload_tag(const Payload& p);

}  // namespace bizur
