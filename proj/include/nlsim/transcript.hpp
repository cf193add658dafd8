#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nlsim/errors.hpp"

namespace nlsim {

using Json = nlohmann::json;

enum class EventKind { LocalOp, LocalMeasure, ClassicalSend, ClassicalReceive };

const char* event_kind_name(EventKind kind);

struct Event {
  int tick;
  std::string site;
  EventKind kind;
  Json payload;
};

// Causally ordered protocol log. Classical messages get sequential ids; an
// event whose parameters depend on a message lists it under payload
// "dependsOn", and verify_causality checks the id was received at that site
// on an earlier tick.
class Transcript {
 public:
  void add(int tick, std::string site, EventKind kind, Json payload = Json::object());

  // Records a classicalSend and returns the message id.
  int send(int tick, const std::string& from, Json payload = Json::object());
  void receive(int tick, const std::string& at, int messageId, Json payload = Json::object());

  const std::vector<Event>& events() const { return events_; }
  long count(EventKind kind) const;

  // Structural check of the ordering invariants; throws InternalError.
  void verify_causality() const;

  // Quantum events share one tick per site; classical traffic is strictly
  // later. This is the instantaneity marker for the measurement stage.
  bool stage_is_instantaneous() const;

  std::string to_json_lines() const;

 private:
  std::vector<Event> events_;
  int nextMessageId_ = 1;
};

struct Resources {
  long ebitsConsumed = 0;
  long rounds = 0;
  long messages = 0;
};

}  // namespace nlsim
