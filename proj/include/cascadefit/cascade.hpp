#pragma once

// Event-log ingestion and cascade reconstruction.
//
// An event log is JSONL, one tweet-level action per line:
//   {"id": "...", "user_id": "...", "ts": "2018-04-01T12:00:00Z",
//    "action": "root|retweet|quote|reply", "parent_id": "..."}
// `parent_id` is present exactly for non-root actions. Unknown keys are ignored.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadefit/models.hpp"

namespace cascadefit {

using Timestamp = std::chrono::sys_seconds;

// RFC 3339 with a `Z` or numeric offset; fractional seconds are truncated.
Timestamp parse_timestamp(std::string_view text);
// Always `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp ts);

enum class Action { Root, Retweet, Quote, Reply };

std::string_view to_string(Action action) noexcept;
std::optional<Action> parse_action(std::string_view text) noexcept;
// Activity channel of a non-root action.
std::optional<Activity> activity_of(Action action) noexcept;

struct TweetEvent {
    std::string id;
    std::string user_id;
    Timestamp timestamp{};
    Action action = Action::Root;
    std::optional<std::string> parent_id;

    bool operator==(const TweetEvent&) const = default;
};

struct MalformedLine {
    std::size_t line = 0;
    std::string reason;
};

struct ParseOptions {
    bool strict = false;
};

struct ParseResult {
    std::vector<TweetEvent> events;
    std::vector<MalformedLine> malformed;
};

// Blank lines are skipped. Malformed lines are reported in `malformed`, or
// raise ParseError in strict mode. Duplicate ids always raise DuplicateIdError.
ParseResult parse_events(std::istream& input, const ParseOptions& options = {});

// Single-record helpers shared with the cascade file format.
std::string event_to_json_line(const TweetEvent& event);
TweetEvent event_from_json_line(std::string_view line);

enum class NodeRole { Root, Parent, Child };

struct CascadeNode {
    TweetEvent event;
    std::optional<std::string> parent;
    std::size_t depth = 0;

    bool operator==(const CascadeNode&) const = default;
};

class CascadeTree {
public:
    CascadeTree(std::string root_id, std::map<std::string, CascadeNode> nodes);

    const std::string& root_id() const noexcept { return root_id_; }
    const std::map<std::string, CascadeNode>& nodes() const noexcept { return nodes_; }
    const CascadeNode& root() const { return nodes_.at(root_id_); }
    const CascadeNode& node(const std::string& id) const { return nodes_.at(id); }
    bool contains(const std::string& id) const { return nodes_.contains(id); }

    // Number of reactions, excluding the root.
    std::size_t size() const noexcept { return nodes_.size() - 1; }

    // Root: no parent. Parent: non-root with children. Child: leaf.
    NodeRole role(const std::string& id) const;

    // Events ordered by (timestamp, id), root included.
    std::vector<TweetEvent> events() const;

    bool operator==(const CascadeTree&) const = default;

private:
    std::string root_id_;
    std::map<std::string, CascadeNode> nodes_;
    std::map<std::string, std::size_t> child_counts_;
};

struct BuildResult {
    // One tree per root event, ordered by root id.
    std::vector<CascadeTree> trees;
    // Events whose parent chain never reaches a root in the log, sorted.
    std::vector<std::string> orphans;
};

BuildResult build_cascades(std::span<const TweetEvent> events);

// Cumulative hourly activity counts anchored at the root timestamp. Index j
// counts reactions that happened within the first j+1 hours.
struct ActivitySeries {
    Timestamp t0{};
    std::size_t horizon_hours = 1;
    std::array<std::vector<std::int64_t>, kActivityCount> cumulative;
    std::vector<std::int64_t> total;

    std::size_t n_obs() const noexcept { return horizon_hours + 1; }
    const std::vector<std::int64_t>& channel(Activity a) const
    {
        return cumulative[static_cast<std::size_t>(a)];
    }
    void validate() const;
    bool operator==(const ActivitySeries&) const = default;
};

struct BinningResult {
    ActivitySeries series;
    // Events past the horizon, excluded from the counts.
    std::vector<std::string> truncated;
};

// `horizon_hours` unset picks the bin of the last event (at least 1).
// Events preceding the root raise ClockSkewError.
BinningResult binned_series(const CascadeTree& tree, std::optional<std::size_t> horizon_hours = std::nullopt);

// Sort by (size desc, root id asc), keep sizes >= min_size, truncate to top_k.
std::vector<CascadeTree> select_cascades(std::vector<CascadeTree> trees, std::size_t min_size,
                                         std::optional<std::size_t> top_k = std::nullopt);

// Cascade file: {"root_id", "events": [...], "series": {"t0", "retweet",
// "quote", "reply", "total"}}.
struct CascadeFile {
    CascadeTree tree;
    ActivitySeries series;
};

std::string write_cascade_file(const CascadeTree& tree, const ActivitySeries& series);
// Accepts one cascade object or an array of them (bundle).
std::vector<CascadeFile> read_cascade_files(std::string_view text);
CascadeFile read_cascade_file(std::string_view text);
std::string write_cascade_bundle(std::span<const CascadeFile> cascades);

} // namespace cascadefit
