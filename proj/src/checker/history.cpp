// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/checker/history.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "bizur/assert.hpp"

namespace bizur::checker {

const char* hop_name(HOp op) {
  switch (op) {
    case HOp::Get: return "get";
    case HOp::Set: return "set";
    case HOp::Delete: return "delete";
    case HOp::CasSet: return "cas_set";
    case HOp::CasDelete: return "cas_delete";
  }
  return "?";
}

uint64_t History::invoke(SimTime t, uint32_t client, HOp op, std::string key,
                         std::string value,
                         std::optional<std::string> expected) {
  OpRecord rec;
  rec.id = ops_.size() + 1;
  rec.client = client;
  rec.op = op;
  rec.key = std::move(key);
  rec.value = std::move(value);
  rec.expected = std::move(expected);
  rec.invoke_time = t;
  rec.invoke_seq = ++event_seq_;
  by_id_[rec.id] = ops_.size();
  ops_.push_back(std::move(rec));
  return ops_.back().id;
}

void History::respond(uint64_t id, SimTime t, Outcome outcome) {
  auto it = by_id_.find(id);
  BIZUR_ASSERT(it != by_id_.end(), "respond without invoke");
  OpRecord& rec = ops_[it->second];
  BIZUR_ASSERT(!rec.outcome.has_value(), "double respond");
  rec.respond_time = t;
  rec.respond_seq = ++event_seq_;
  rec.outcome = std::move(outcome);
}

size_t History::responded_count() const {
  size_t n = 0;
  for (const auto& op : ops_)
    if (op.responded()) ++n;
  return n;
}

size_t History::acked_count() const {
  size_t n = 0;
  for (const auto& op : ops_) {
    if (!op.responded()) continue;
    switch (op.outcome->kind) {
      case Outcome::Kind::Value:
      case Outcome::Kind::Absent:
      case Outcome::Kind::Ok:
      case Outcome::Kind::CasMismatch:
        ++n;
        break;
      default:
        break;
    }
  }
  return n;
}

namespace {

std::string printable(const std::optional<std::string>& v) {
  if (!v) return "-";
  std::string out;
  out.reserve(v->size());
  for (char c : *v) {
    if (c >= 0x20 && c < 0x7f && c != ' ')
      out.push_back(c);
    else
      out.push_back('.');
  }
  return out.empty() ? "(empty)" : out;
}

const char* outcome_name(Outcome::Kind k) {
  switch (k) {
    case Outcome::Kind::Value: return "value";
    case Outcome::Kind::Absent: return "absent";
    case Outcome::Kind::Ok: return "ok";
    case Outcome::Kind::CasMismatch: return "cas_mismatch";
    case Outcome::Kind::Indeterminate: return "indeterminate";
    case Outcome::Kind::FailedClean: return "failed";
  }
  return "?";
}

struct Line {
  uint64_t seq;
  std::string text;
};

}  // namespace

std::string History::to_text() const {
  std::vector<Line> lines;
  lines.reserve(ops_.size() * 2);
  for (const auto& op : ops_) {
    std::ostringstream inv;
    inv << "t=" << op.invoke_time << " client=" << op.client << " invoke "
        << hop_name(op.op) << " key=" << op.key;
    if (op.op == HOp::Set || op.op == HOp::CasSet)
      inv << " value=" << printable(op.value);
    if (op.op == HOp::CasSet || op.op == HOp::CasDelete)
      inv << " expected=" << printable(op.expected);
    inv << "\n";
    lines.push_back({op.invoke_seq, inv.str()});
    if (op.responded()) {
      std::ostringstream rsp;
      rsp << "t=" << *op.respond_time << " client=" << op.client << " respond "
          << hop_name(op.op) << " key=" << op.key << " result="
          << outcome_name(op.outcome->kind);
      if (op.outcome->kind == Outcome::Kind::Value ||
          op.outcome->kind == Outcome::Kind::CasMismatch)
        rsp << " value=" << printable(op.outcome->value);
      rsp << "\n";
      lines.push_back({op.respond_seq, rsp.str()});
    }
  }
  std::sort(lines.begin(), lines.end(),
            [](const Line& a, const Line& b) { return a.seq < b.seq; });
  std::string out;
  for (auto& l : lines) out += l.text;
  return out;
}

std::map<std::string, std::string> History::oracle_map(
    std::vector<std::string>* tainted_keys) const {
  std::set<std::string> tainted;
  for (const auto& op : ops_) {
    bool maybe = !op.responded() ||
                 op.outcome->kind == Outcome::Kind::Indeterminate;
    if (maybe && op.op != HOp::Get) tainted.insert(op.key);
  }
  std::vector<const OpRecord*> acked;
  for (const auto& op : ops_) {
    if (!op.responded()) continue;
    if (op.outcome->kind != Outcome::Kind::Ok) continue;
    acked.push_back(&op);
  }
  // Replay order below is respond order, which only equals linearization
  // order when a key's acknowledged mutations never overlap; overlapping
  // keys are excluded rather than guessed.
  {
    std::map<std::string, std::vector<const OpRecord*>> per_key;
    for (const OpRecord* op : acked) per_key[op->key].push_back(op);
    for (auto& [key, ops] : per_key) {
      std::sort(ops.begin(), ops.end(),
                [](const OpRecord* a, const OpRecord* b) {
                  return a->invoke_seq < b->invoke_seq;
                });
      uint64_t max_respond = 0;
      for (const OpRecord* op : ops) {
        if (op->invoke_seq < max_respond) {
          tainted.insert(key);
          break;
        }
        max_respond = std::max(max_respond, op->respond_seq);
      }
    }
  }
  std::sort(acked.begin(), acked.end(),
            [](const OpRecord* a, const OpRecord* b) {
              return a->respond_seq < b->respond_seq;
            });
  std::map<std::string, std::string> state;
  for (const OpRecord* op : acked) {
    if (tainted.count(op->key)) continue;
    switch (op->op) {
      case HOp::Set:
      case HOp::CasSet:
        state[op->key] = op->value;
        break;
      case HOp::Delete:
      case HOp::CasDelete:
        state.erase(op->key);
        break;
      default:
        break;
    }
  }
  if (tainted_keys)
    tainted_keys->assign(tainted.begin(), tainted.end());
  return state;
}

}  // namespace bizur::checker
