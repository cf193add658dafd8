#include "nlsim/transcript.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace nlsim {

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::LocalOp: return "localOp";
    case EventKind::LocalMeasure: return "localMeasure";
    case EventKind::ClassicalSend: return "classicalSend";
    case EventKind::ClassicalReceive: return "classicalReceive";
  }
  throw InternalError("event_kind_name: unknown kind");
}

void Transcript::add(int tick, std::string site, EventKind kind, Json payload) {
  events_.push_back(Event{tick, std::move(site), kind, std::move(payload)});
}

int Transcript::send(int tick, const std::string& from, Json payload) {
  int id = nextMessageId_++;
  payload["messageId"] = id;
  add(tick, from, EventKind::ClassicalSend, std::move(payload));
  return id;
}

void Transcript::receive(int tick, const std::string& at, int messageId, Json payload) {
  payload["messageId"] = messageId;
  add(tick, at, EventKind::ClassicalReceive, std::move(payload));
}

long Transcript::count(EventKind kind) const {
  long n = 0;
  for (const auto& e : events_)
    if (e.kind == kind) ++n;
  return n;
}

void Transcript::verify_causality() const {
  std::map<int, int> sendTick;
  std::map<std::pair<std::string, int>, int> receiveTick;  // (site, msg) -> tick
  for (const auto& e : events_) {
    if (e.kind == EventKind::ClassicalSend) {
      sendTick[e.payload.at("messageId").get<int>()] = e.tick;
    } else if (e.kind == EventKind::ClassicalReceive) {
      int id = e.payload.at("messageId").get<int>();
      auto it = sendTick.find(id);
      if (it == sendTick.end())
        throw InternalError("transcript: receive of a message never sent");
      if (it->second >= e.tick)
        throw InternalError("transcript: message received no later than it was sent");
      receiveTick[{e.site, id}] = e.tick;
    }
  }
  for (const auto& e : events_) {
    if (!e.payload.contains("dependsOn")) continue;
    for (int id : e.payload.at("dependsOn")) {
      auto it = receiveTick.find({e.site, id});
      if (it == receiveTick.end() || it->second >= e.tick)
        throw InternalError("transcript: event depends on a value not yet received at its site");
    }
  }
}

bool Transcript::stage_is_instantaneous() const {
  std::map<std::string, int> quantumTick;
  int maxQuantum = 0;
  for (const auto& e : events_) {
    if (e.kind != EventKind::LocalOp && e.kind != EventKind::LocalMeasure) continue;
    auto [it, fresh] = quantumTick.try_emplace(e.site, e.tick);
    if (!fresh && it->second != e.tick) return false;
    maxQuantum = std::max(maxQuantum, e.tick);
  }
  for (const auto& e : events_)
    if ((e.kind == EventKind::ClassicalSend || e.kind == EventKind::ClassicalReceive) &&
        e.tick <= maxQuantum)
      return false;
  return true;
}

std::string Transcript::to_json_lines() const {
  std::ostringstream out;
  for (const auto& e : events_) {
    Json line = {{"tick", e.tick},
                 {"site", e.site},
                 {"kind", event_kind_name(e.kind)},
                 {"payload", e.payload}};
    out << line.dump() << "\n";
  }
  return out.str();
}

}  // namespace nlsim
