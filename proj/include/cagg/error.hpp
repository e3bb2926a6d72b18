#pragma once

#include <stdexcept>
#include <string>

namespace cagg {

enum class Errc {
  replay_detected,
  auth_failure,
  disconnected_graph,
  stale_round,
  unknown_child,
  already_emitted,
  no_such_round,
  exclusion_not_resolvable,
  duplicate_participant,
  unknown_participant,
  probe_timeout,
  empty_participants,
  out_of_range,
  malformed_message,
  scenario_invalid,
};

inline const char* errc_name(Errc e) {
  switch (e) {
    case Errc::replay_detected: return "ReplayDetected";
    case Errc::auth_failure: return "AuthFailure";
    case Errc::disconnected_graph: return "DisconnectedGraph";
    case Errc::stale_round: return "StaleRound";
    case Errc::unknown_child: return "UnknownChild";
    case Errc::already_emitted: return "AlreadyEmitted";
    case Errc::no_such_round: return "NoSuchRound";
    case Errc::exclusion_not_resolvable: return "ExclusionNotResolvable";
    case Errc::duplicate_participant: return "DuplicateParticipant";
    case Errc::unknown_participant: return "UnknownParticipant";
    case Errc::probe_timeout: return "ProbeTimeout";
    case Errc::empty_participants: return "EmptyParticipants";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::malformed_message: return "MalformedMessage";
    case Errc::scenario_invalid: return "ScenarioInvalid";
  }
  return "Unknown";
}

/// Protocol-level failure. `code()` identifies the condition; the message
/// carries context for logs.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace cagg
