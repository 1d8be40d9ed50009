// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/kv/kv.hpp"

#include <algorithm>

#include "bizur/assert.hpp"
#include "bizur/codec.hpp"
#include "bizur/hash.hpp"
#include "bizur/node/node.hpp"

namespace bizur {

KvFrontend::KvFrontend(NodeInstance& node) : node_(node) {}

uint32_t KvFrontend::bucket_of(const std::string& key) const {
  return hash_key(key, node_.num_buckets(), kBucketHashSeed);
}

void KvFrontend::finish(const Envelope& request, KvResponse resp) {
  inflight_.erase(request.msg_id);
  switch (resp.kind) {
    case KvResponse::Kind::Value:
    case KvResponse::Kind::Absent:
    case KvResponse::Kind::Ok:
    case KvResponse::Kind::CasMismatch:
    case KvResponse::Kind::Keys:
    case KvResponse::Kind::BucketData: {
      // Definitive outcomes are cached so a retransmitted request is
      // answered instead of re-executed.
      if (reply_cache_.size() >= kReplyCacheCap) {
        reply_cache_.erase(reply_cache_order_.front());
        reply_cache_order_.pop_front();
      }
      reply_cache_.emplace(request.msg_id, resp);
      reply_cache_order_.push_back(request.msg_id);
      break;
    }
    case KvResponse::Kind::NotALeader:
    case KvResponse::Kind::ReconfigError:
      break;  // routing outcomes may change; never cached
  }
  node_.send_response(request, std::move(resp));
}

bool KvFrontend::reject_if_unservable(const Envelope& env) {
  const KvRequest& req = std::get<ClientRequest>(env.payload).req;
  if (node_.draining() && !req.internal) {
    node_.metrics().drain_redirects++;
    finish(env, KvResponse::make_reconfig_error(*node_.drain_successor()));
    return true;
  }
  if (!node_.is_leader()) {
    finish(env, KvResponse::make_not_a_leader(node_.leader_hint(), false));
    return true;
  }
  return false;
}

void KvFrontend::handle(const Envelope& env) {
  const KvRequest& req = std::get<ClientRequest>(env.payload).req;
  if (node_.draining() && !req.internal) {
    node_.metrics().drain_redirects++;
    node_.send_response(
        env, KvResponse::make_reconfig_error(*node_.drain_successor()));
    return;
  }
  if (auto it = reply_cache_.find(env.msg_id); it != reply_cache_.end()) {
    node_.send_response(env, it->second);
    return;
  }
  if (inflight_.count(env.msg_id)) return;  // retransmit of a running op
  if (!node_.is_leader()) {
    node_.send_response(
        env, KvResponse::make_not_a_leader(node_.leader_hint(), false));
    return;
  }
  if (req.key.size() > kMaxKeyBytes || req.value.size() > kMaxValueBytes) {
    node_.send_response(env,
                        KvResponse::make_not_a_leader(std::nullopt, false));
    return;
  }

  inflight_.insert(env.msg_id);
  node_.metrics().client_ops++;
  if (node_.draining() && !req.internal) node_.metrics().ops_executed_draining++;

  switch (req.op) {
    case KvOp::Get:
      do_get(env);
      break;
    case KvOp::Set:
    case KvOp::Delete:
    case KvOp::CasSet:
    case KvOp::CasDelete:
      do_mutation(env);
      break;
    case KvOp::IterateKeys:
      do_iterate(env);
      break;
    case KvOp::FetchBucket:
      do_fetch_bucket(env);
      break;
  }
}

// ---- get ---------------------------------------------------------------------

void KvFrontend::do_get(Envelope env) {
  const KvRequest& req = std::get<ClientRequest>(env.payload).req;
  uint32_t index = bucket_of(req.key);
  node_.lock_bucket(index, [this, env = std::move(env),
                            index](NodeInstance::BucketGuard guard) {
    if (reject_if_unservable(env)) return;
    const std::string key = std::get<ClientRequest>(env.payload).req.key;
    node_.read_bucket(index, [this, env, index, key, guard](const Bucket* b) {
      if (!b) {
        // Reads never change state; a failed read is safe to retry.
        finish(env, KvResponse::make_not_a_leader(node_.leader_hint(), false));
        return;
      }
      auto value = decode(*b, key);
      finish(env, value ? KvResponse::make_value(*value)
                        : KvResponse::make_absent());
    });
  });
}

// ---- mutations -----------------------------------------------------------------

void KvFrontend::do_mutation(Envelope env) {
  const KvRequest& req = std::get<ClientRequest>(env.payload).req;
  uint32_t index = bucket_of(req.key);
  node_.lock_bucket(index, [this, env = std::move(env),
                            index](NodeInstance::BucketGuard guard) {
    if (reject_if_unservable(env)) return;
    if (node_.reconfiguring()) {
      // Reconfig instances pull the bucket from the old instance first; the
      // copy write also recovers the bucket, after which the local copy is
      // the base.
      node_.ensure_ready(index, [this, env, index,
                                 guard](NodeInstance::Ready r) {
        if (!r.ok) {
          finish(env,
                 KvResponse::make_not_a_leader(node_.leader_hint(), false));
          return;
        }
        apply_mutation(env, index, node_.local_bucket(index), false, guard);
      });
      return;
    }
    node_.fetch_for_update(
        index, [this, env, index, guard](std::optional<Bucket> base,
                                         bool remote) {
          if (!base) {
            // The read round failed before any write was sent: not applied.
            finish(env,
                   KvResponse::make_not_a_leader(node_.leader_hint(), false));
            return;
          }
          apply_mutation(env, index, std::move(*base), remote, guard);
        });
  });
}

void KvFrontend::apply_mutation(const Envelope& env, uint32_t index,
                                Bucket base, bool base_remote,
                                NodeInstance::BucketGuard guard) {
  const KvRequest& req = std::get<ClientRequest>(env.payload).req;
  BIZUR_ASSERT(bucket_of(req.key) == base.index, "key hashed to wrong bucket");

  // The bucket section stays held until the final round resolves; reads
  // interleaving with an unresolved write would expose a value the next
  // leader's recovery might not preserve.
  auto write_ok = [this, env, guard](bool ok) {
    if (ok) {
      finish(env, KvResponse::make_ok());
    } else {
      // The write may have reached some replicas before the majority was
      // lost: indeterminate, the client must not blindly retry.
      finish(env, KvResponse::make_not_a_leader(node_.leader_hint(), true));
    }
  };

  switch (req.op) {
    case KvOp::Set:
      node_.replicate_write(encode_set(std::move(base), req.key, req.value),
                            write_ok);
      return;
    case KvOp::Delete:
      node_.replicate_write(encode_delete(std::move(base), req.key), write_ok);
      return;
    case KvOp::CasSet:
    case KvOp::CasDelete: {
      std::optional<std::string> actual = decode(base, req.key);
      if (actual == req.expected) {
        Bucket next = req.op == KvOp::CasSet
                          ? encode_set(std::move(base), req.key, req.value)
                          : encode_delete(std::move(base), req.key);
        node_.replicate_write(std::move(next), write_ok);
        return;
      }
      // Mismatch: no state change, but the value we are about to expose
      // must first be fixed at a majority (an unrecovered base may exist on
      // a single replica only).
      if (base_remote) {
        node_.replicate_write(
            std::move(base), [this, env, actual, guard](bool ok) {
              if (ok) {
                finish(env, KvResponse::make_cas_mismatch(actual));
              } else {
                finish(env, KvResponse::make_not_a_leader(node_.leader_hint(),
                                                          false));
              }
            });
      } else {
        validate_then_mismatch(env, index, actual, std::move(guard));
      }
      return;
    }
    default:
      BIZUR_ASSERT(false, "not a mutation");
  }
}

void KvFrontend::validate_then_mismatch(const Envelope& env, uint32_t index,
                                        std::optional<std::string> actual,
                                        NodeInstance::BucketGuard guard) {
  node_.validate_leadership(index, [this, env, actual, guard](bool ok) {
    if (ok) {
      finish(env, KvResponse::make_cas_mismatch(actual));
    } else {
      finish(env, KvResponse::make_not_a_leader(node_.leader_hint(), false));
    }
  });
}

// ---- iterate_keys ----------------------------------------------------------------

struct KvFrontend::IterState {
  Envelope env;
  uint32_t awaiting = 0;      // outstanding per-bucket readiness work
  bool failed = false;
  bool done = false;
  uint32_t batch_start = 0;   // validation cursor
  uint32_t batch_size = 0;
};

void KvFrontend::do_iterate(Envelope env) {
  auto st = std::make_shared<IterState>();
  st->env = std::move(env);
  st->batch_size = node_.config().iterate_batch == 0
                       ? node_.num_buckets()
                       : node_.config().iterate_batch;
  iterate_ready_step(std::move(st));
}

void KvFrontend::iterate_ready_step(std::shared_ptr<IterState> st) {
  // Bring every bucket to recovered-and-copied before batching. Buckets are
  // independent, so the recoveries run concurrently; one long serial pass
  // would overrun the client's failure-detection timeout on a cold leader.
  uint32_t n = node_.num_buckets();
  st->awaiting = 1;  // guard against all-ready synchronous completion
  for (uint32_t i = 0; i < n; ++i) {
    if (node_.bucket_ready(i)) continue;
    st->awaiting++;
    node_.lock_bucket(i, [this, st, i](NodeInstance::BucketGuard guard) {
      if (st->done) return;
      if (!node_.is_leader()) {
        st->failed = true;
        iterate_ready_done(st);
        return;
      }
      node_.ensure_ready(i, [this, st, guard](NodeInstance::Ready r) {
        if (st->done) return;
        if (!r.ok) st->failed = true;
        iterate_ready_done(st);
      });
    });
  }
  iterate_ready_done(st);
}

void KvFrontend::iterate_ready_done(std::shared_ptr<IterState> st) {
  if (st->done || --st->awaiting > 0) return;
  if (st->failed || !node_.is_leader()) {
    st->done = true;
    finish(st->env, KvResponse::make_not_a_leader(node_.leader_hint(), false));
    return;
  }
  iterate_validate_step(std::move(st));
}

void KvFrontend::iterate_validate_step(std::shared_ptr<IterState> st) {
  if (st->batch_start >= node_.num_buckets()) {
    st->done = true;
    // Validated leader of every batch: the union is computed locally, no
    // bucket content crosses the wire.
    std::set<std::string> keys;
    for (uint32_t i = 0; i < node_.num_buckets(); ++i) {
      auto bucket_keys = decode_keys(node_.local_bucket(i));
      keys.merge(bucket_keys);
    }
    finish(st->env, KvResponse::make_keys(
                        std::vector<std::string>(keys.begin(), keys.end())));
    return;
  }
  uint32_t representative = st->batch_start;
  st->batch_start += st->batch_size;
  node_.validate_leadership(representative, [this, st](bool ok) {
    if (st->done) return;
    if (!ok) {
      st->done = true;
      finish(st->env,
             KvResponse::make_not_a_leader(node_.leader_hint(), false));
      return;
    }
    iterate_validate_step(st);
  });
}

// ---- fetch_bucket (internal) -------------------------------------------------------

void KvFrontend::do_fetch_bucket(Envelope env) {
  const KvRequest& req = std::get<ClientRequest>(env.payload).req;
  if (!req.internal || req.index >= node_.num_buckets()) {
    finish(env, KvResponse::make_not_a_leader(std::nullopt, false));
    return;
  }
  uint32_t index = req.index;
  node_.lock_bucket(index, [this, env = std::move(env),
                            index](NodeInstance::BucketGuard guard) {
    if (reject_if_unservable(env)) return;
    node_.read_bucket(index, [this, env, guard](const Bucket* b) {
      if (!b) {
        finish(env, KvResponse::make_not_a_leader(node_.leader_hint(), false));
        return;
      }
      finish(env, KvResponse::make_bucket_data(
                      std::make_shared<const Bucket>(*b)));
    });
  });
}

}  // namespace bizur
