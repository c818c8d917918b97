#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "provhunt/errors.hpp"
#include "provhunt/types.hpp"

namespace provhunt {

/// Returned for well-formed records whose type is not one of the seven tracked
/// event types.
struct Skip {
  std::string type;
};

using ParseResult = std::variant<RawEvent, Skip>;

/// Parses one newline-delimited JSON record:
///   {"type":..,"subj":{"uuid","kind","name"},"obj":{..},"t":<int ns>}
/// Throws Error(MalformedRecord) or Error(IllegalEdge). Ordering is checked by
/// EventStream, not here.
ParseResult parse_event(std::string_view line);

/// Compact JSON in the wire schema; parse_event(serialize_event(e)) == e.
std::string serialize_event(const RawEvent& event);

/// "srcIP:srcPort->dstIP:dstPort" with "*" for missing parts. A bare address
/// is taken as the remote (destination) endpoint.
std::string canonical_socket_name(std::string_view text);

struct IngestIssue {
  std::size_t line = 0;  // 1-based
  ErrorCode code = ErrorCode::MalformedRecord;
  std::string message;
};

struct IngestStats {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  std::size_t errored = 0;
  std::vector<IngestIssue> issues;
};

struct StreamOptions {
  /// Out-of-order slack in nanoseconds. Events up to this far behind the
  /// newest accepted timestamp are re-sequenced; anything older is a
  /// TimeRegression.
  Timestamp tolerance = 0;
  /// Throw on the first bad line (with its line number) instead of counting it.
  bool strict = false;
};

/// Single-pass reader that emits accepted events in timestamp order, ties in
/// input order.
class EventStream {
 public:
  explicit EventStream(std::istream& in, StreamOptions options = {});

  std::optional<RawEvent> next();

  const IngestStats& stats() const noexcept { return stats_; }

 private:
  struct Pending {
    Timestamp t;
    std::size_t seq;
    RawEvent event;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  void consume_line(const std::string& line);
  void check_entity(const Entity& entity);
  bool releasable(const Pending& p) const;

  std::istream& in_;
  StreamOptions options_;
  IngestStats stats_;
  std::priority_queue<Pending, std::vector<Pending>, Later> buffer_;
  std::optional<Timestamp> newest_;
  std::size_t seq_ = 0;
  bool eof_ = false;
  std::unordered_map<std::string, std::pair<EntityKind, std::string>> seen_;
};

std::vector<RawEvent> read_events(std::istream& in, StreamOptions options = {},
                                  IngestStats* stats = nullptr);

std::vector<RawEvent> read_event_file(const std::string& path, StreamOptions options = {},
                                      IngestStats* stats = nullptr);

}  // namespace provhunt
