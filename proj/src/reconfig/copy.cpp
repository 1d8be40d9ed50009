// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/reconfig/copy.hpp"

#include "bizur/assert.hpp"
#include "bizur/node/node.hpp"

namespace bizur {

namespace {
RouterOptions copy_router_options(const NodeConfig& cfg) {
  RouterOptions opt;
  opt.request_timeout = cfg.copy_request_timeout;
  opt.retransmit_interval = cfg.copy_retransmit;
  opt.election_token_period = cfg.copy_election_period;
  opt.retry_cap = 0;
  opt.internal = true;
  return opt;
}
}  // namespace

CopyEngine::CopyEngine(NodeInstance& node, InstanceDescriptor source)
    : node_(node),
      router_(node.transport(), node.self(), std::move(source),
              copy_router_options(node.config())) {}

bool CopyEngine::on_envelope(const Envelope& env) {
  return router_.on_envelope(env);
}

void CopyEngine::copy_bucket(uint32_t index, std::function<void(bool)> done) {
  // Copies run one at a time through the internal client; requests for
  // distinct buckets queue here while their bucket sections stay held.
  queue_.push_back(Job{index, std::move(done)});
  pump();
}

void CopyEngine::pump() {
  if (pumping_ || queue_.empty() || !router_.idle()) return;
  Job job = std::move(queue_.front());
  queue_.pop_front();
  if (!node_.is_leader()) {
    job.done(false);
    pump();
    return;
  }
  pumping_ = true;
  KvRequest req;
  req.op = KvOp::FetchBucket;
  req.index = job.index;
  ElectId elect = node_.elect_id();
  router_.submit(req, [this, job = std::move(job), elect](SubmitResult r) {
    pumping_ = false;
    finish_fetch(job, elect, std::move(r));
  });
}

void CopyEngine::finish_fetch(const Job& job, ElectId elect, SubmitResult r) {
  auto done_and_pump = [this, &job](bool ok) {
    job.done(ok);
    pump();
  };
  if (!node_.is_leader() || node_.elect_id() != elect) {
    done_and_pump(false);
    return;
  }
  if (r.status != SubmitStatus::Ok ||
      r.response.kind != KvResponse::Kind::BucketData) {
    done_and_pump(false);
    return;
  }
  BIZUR_ASSERT(r.response.bucket != nullptr, "fetch returned no bucket");
  Bucket copied = *r.response.bucket;
  copied.index = job.index;
  copied.needs_copy = false;
  // Continue this instance's version sequence; replicate_write stamps the
  // current elect_id and bumps the counter.
  copied.ver = node_.local_bucket(job.index).ver;
  node_.transport().chaos_point(
      "reconfig.copy_write", node_.self(),
      [this, elect, copied = std::move(copied), done = job.done]() mutable {
        if (!node_.is_leader() || node_.elect_id() != elect) {
          done(false);
          pump();
          return;
        }
        node_.replicate_write(std::move(copied),
                              [this, done = std::move(done)](bool ok) {
                                if (ok) node_.metrics().copies++;
                                done(ok);
                                pump();
                              });
      });
}

}  // namespace bizur
