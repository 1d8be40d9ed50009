// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
#include "bizur/checker/checker.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_set>

#include "bizur/assert.hpp"

namespace bizur::checker {

const char* verdict_name(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Linearizable: return "linearizable";
    case Verdict::Kind::Violation: return "violation";
    case Verdict::Kind::SearchBudgetExceeded: return "budget_exceeded";
  }
  return "?";
}

namespace {

// Register state: a value or absent.
using RegState = std::optional<std::string>;

struct KOp {
  const OpRecord* rec = nullptr;
  // Completed ops carry a definite outcome that constrains the model;
  // maybe-ops (indeterminate or still pending) may be linearized anywhere
  // after their invocation, or never.
  bool completed = false;
  uint64_t invoke_seq = 0;
  uint64_t respond_seq = UINT64_MAX;
};

// Applies one op to the register. Returns false when a completed op's
// outcome contradicts the state.
bool apply_op(const KOp& op, RegState& state) {
  const OpRecord& r = *op.rec;
  if (op.completed) {
    const Outcome& out = *r.outcome;
    switch (r.op) {
      case HOp::Get:
        if (out.kind == Outcome::Kind::Value)
          return state.has_value() && *state == *out.value;
        return !state.has_value();  // Absent
      case HOp::Set:
        state = r.value;
        return true;
      case HOp::Delete:
        state.reset();
        return true;
      case HOp::CasSet:
      case HOp::CasDelete:
        if (out.kind == Outcome::Kind::Ok) {
          if (state != r.expected) return false;
          if (r.op == HOp::CasSet)
            state = r.value;
          else
            state.reset();
          return true;
        }
        // CasMismatch: the reported actual must equal the state, which must
        // differ from the expectation. No state change.
        return state != r.expected && state == out.value;
    }
    return false;
  }
  // Maybe-op: takes its natural effect, never constrains.
  switch (r.op) {
    case HOp::Get:
      return true;  // no effect; pruned before the search
    case HOp::Set:
      state = r.value;
      return true;
    case HOp::Delete:
      state.reset();
      return true;
    case HOp::CasSet:
      if (state == r.expected) state = r.value;
      return true;
    case HOp::CasDelete:
      if (state == r.expected) state.reset();
      return true;
  }
  return false;
}

struct KeySearch {
  std::vector<KOp> ops;
  std::vector<size_t> completed_order;  // indices sorted by respond_seq
  uint64_t budget = 0;
  std::unordered_set<std::string> visited;
  std::vector<uint64_t> witness;

  enum class Result { Ok, Violation, Budget };

  std::string state_key(const std::vector<uint64_t>& lin,
                        const RegState& val) const {
    std::string key(reinterpret_cast<const char*>(lin.data()),
                    lin.size() * sizeof(uint64_t));
    key.push_back(val.has_value() ? 1 : 0);
    if (val) key += *val;
    return key;
  }

  bool is_lin(const std::vector<uint64_t>& lin, size_t i) const {
    return (lin[i >> 6] >> (i & 63)) & 1;
  }
  void set_lin(std::vector<uint64_t>& lin, size_t i, bool v) const {
    if (v)
      lin[i >> 6] |= uint64_t(1) << (i & 63);
    else
      lin[i >> 6] &= ~(uint64_t(1) << (i & 63));
  }

  Result search(std::vector<uint64_t>& lin, RegState val,
                std::vector<uint64_t>& path) {
    // Minimal-response rule: the earliest-responding unlinearized completed
    // op must be linearized before anything invoked after its response.
    size_t front = SIZE_MAX;
    for (size_t idx : completed_order) {
      if (!is_lin(lin, idx)) {
        front = idx;
        break;
      }
    }
    if (front == SIZE_MAX) {
      witness = path;  // all completed ops explained; maybes may stay out
      return Result::Ok;
    }
    uint64_t bound = ops[front].respond_seq;
    for (size_t j = 0; j < ops.size(); ++j) {
      if (is_lin(lin, j)) continue;
      if (ops[j].invoke_seq >= bound) continue;
      if (budget == 0) return Result::Budget;
      --budget;
      RegState next = val;
      if (!apply_op(ops[j], next)) continue;
      set_lin(lin, j, true);
      auto key = state_key(lin, next);
      if (visited.insert(std::move(key)).second) {
        path.push_back(ops[j].rec->id);
        Result r = search(lin, std::move(next), path);
        if (r != Result::Violation) {
          if (r == Result::Ok) return r;
          set_lin(lin, j, false);
          return r;
        }
        path.pop_back();
      }
      set_lin(lin, j, false);
    }
    return Result::Violation;
  }

  Result run() {
    std::vector<uint64_t> lin((ops.size() + 63) / 64, 0);
    std::vector<uint64_t> path;
    return search(lin, std::nullopt, path);
  }
};

KeySearch::Result check_key(const std::vector<const OpRecord*>& recs,
                            uint64_t budget,
                            std::vector<uint64_t>* witness_out) {
  KeySearch ks;
  ks.budget = budget;
  for (const OpRecord* r : recs) {
    bool completed =
        r->responded() && r->outcome->kind != Outcome::Kind::Indeterminate;
    if (completed && r->outcome->kind == Outcome::Kind::FailedClean)
      continue;  // provably never applied
    // A maybe-get has no effect and no constraint; skip it outright.
    if (!completed && r->op == HOp::Get) continue;
    KOp op;
    op.rec = r;
    op.completed = completed;
    op.invoke_seq = r->invoke_seq;
    op.respond_seq = completed ? r->respond_seq : UINT64_MAX;
    ks.ops.push_back(op);
  }
  for (size_t i = 0; i < ks.ops.size(); ++i)
    if (ks.ops[i].completed) ks.completed_order.push_back(i);
  std::sort(ks.completed_order.begin(), ks.completed_order.end(),
            [&](size_t a, size_t b) {
              return ks.ops[a].respond_seq < ks.ops[b].respond_seq;
            });
  auto result = ks.run();
  if (result == KeySearch::Result::Ok && witness_out)
    witness_out->insert(witness_out->end(), ks.witness.begin(),
                        ks.witness.end());
  return result;
}

// Shrinks a violating key history: the prefix closed under the first k
// responses (later responses demoted to pending).
size_t minimal_failing_prefix(const std::vector<const OpRecord*>& recs,
                              uint64_t budget) {
  std::vector<const OpRecord*> completed = recs;
  completed.erase(std::remove_if(completed.begin(), completed.end(),
                                 [](const OpRecord* r) {
                                   return !r->responded();
                                 }),
                  completed.end());
  std::sort(completed.begin(), completed.end(),
            [](const OpRecord* a, const OpRecord* b) {
              return a->respond_seq < b->respond_seq;
            });
  for (size_t k = 1; k <= completed.size(); ++k) {
    uint64_t cut = completed[k - 1]->respond_seq;
    std::vector<OpRecord> trimmed;
    trimmed.reserve(recs.size());
    for (const OpRecord* r : recs) {
      if (r->invoke_seq > cut) continue;
      OpRecord copy = *r;
      if (copy.respond_seq > cut) {
        copy.outcome.reset();
        copy.respond_seq = UINT64_MAX;
        copy.respond_time.reset();
      }
      trimmed.push_back(std::move(copy));
    }
    std::vector<const OpRecord*> view;
    for (const auto& r : trimmed) view.push_back(&r);
    if (check_key(view, budget, nullptr) == KeySearch::Result::Violation)
      return k;
  }
  return completed.size();
}

std::string key_log(const std::vector<const OpRecord*>& recs) {
  History sub;
  std::vector<const OpRecord*> sorted = recs;
  std::sort(sorted.begin(), sorted.end(),
            [](const OpRecord* a, const OpRecord* b) {
              return a->invoke_seq < b->invoke_seq;
            });
  for (const OpRecord* r : sorted) {
    uint64_t id = sub.invoke(r->invoke_time, r->client, r->op, r->key,
                             r->value, r->expected);
    if (r->responded()) sub.respond(id, *r->respond_time, *r->outcome);
  }
  return sub.to_text();
}

}  // namespace

Verdict check(const History& history, CheckParams params) {
  std::map<std::string, std::vector<const OpRecord*>> per_key;
  for (const auto& op : history.ops()) per_key[op.key].push_back(&op);

  Verdict verdict;
  for (auto& [key, recs] : per_key) {
    std::vector<uint64_t> witness;
    auto result = check_key(recs, params.state_budget, &witness);
    switch (result) {
      case KeySearch::Result::Ok:
        verdict.witness.insert(verdict.witness.end(), witness.begin(),
                               witness.end());
        break;
      case KeySearch::Result::Violation: {
        verdict.kind = Verdict::Kind::Violation;
        verdict.failing_key = key;
        size_t prefix = minimal_failing_prefix(recs, params.state_budget);
        std::ostringstream detail;
        detail << "key " << key << ": no linearization explains the first "
               << prefix << " response(s)";
        verdict.detail = detail.str();
        verdict.log = key_log(recs);
        return verdict;
      }
      case KeySearch::Result::Budget:
        verdict.kind = Verdict::Kind::SearchBudgetExceeded;
        verdict.failing_key = key;
        verdict.detail = "state budget exceeded on key " + key;
        return verdict;
    }
  }
  return verdict;
}

}  // namespace bizur::checker
