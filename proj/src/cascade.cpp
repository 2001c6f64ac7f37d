#include "cascadefit/cascade.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "cascadefit/errors.hpp"
#include "json.hpp"

namespace cascadefit {

using ojson = nlohmann::ordered_json;

namespace {

int parse_digits(std::string_view text, std::size_t pos, std::size_t count)
{
    if (pos + count > text.size())
        throw std::invalid_argument("timestamp truncated");
    int value = 0;
    for (std::size_t k = pos; k < pos + count; ++k) {
        const char c = text[k];
        if (c < '0' || c > '9')
            throw std::invalid_argument(fmt::format("unexpected character '{}' in timestamp", c));
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, std::string_view allowed)
{
    if (pos >= text.size() || allowed.find(text[pos]) == std::string_view::npos)
        throw std::invalid_argument(fmt::format("malformed timestamp '{}'", text));
}

} // namespace

Timestamp parse_timestamp(std::string_view text)
{
    using namespace std::chrono;
    // YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
    const int y = parse_digits(text, 0, 4);
    expect_char(text, 4, "-");
    const int mo = parse_digits(text, 5, 2);
    expect_char(text, 7, "-");
    const int d = parse_digits(text, 8, 2);
    expect_char(text, 10, "Tt ");
    const int hh = parse_digits(text, 11, 2);
    expect_char(text, 13, ":");
    const int mm = parse_digits(text, 14, 2);
    expect_char(text, 16, ":");
    const int ss = parse_digits(text, 17, 2);
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9')
            ++pos;
        if (pos == start)
            throw std::invalid_argument(fmt::format("malformed fractional seconds in '{}'", text));
    }
    int offset_minutes = 0;
    if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
        ++pos;
    } else {
        expect_char(text, pos, "+-");
        const int sign = text[pos] == '-' ? -1 : 1;
        const int oh = parse_digits(text, pos + 1, 2);
        expect_char(text, pos + 3, ":");
        const int om = parse_digits(text, pos + 4, 2);
        if (oh > 23 || om > 59)
            throw std::invalid_argument(fmt::format("invalid UTC offset in '{}'", text));
        offset_minutes = sign * (oh * 60 + om);
        pos += 6;
    }
    if (pos != text.size())
        throw std::invalid_argument(fmt::format("trailing characters in timestamp '{}'", text));

    const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!date.ok())
        throw std::invalid_argument(fmt::format("invalid calendar date in '{}'", text));
    // 60 admits a leap second; it folds onto the next minute.
    if (hh > 23 || mm > 59 || ss > 60)
        throw std::invalid_argument(fmt::format("invalid time of day in '{}'", text));
    const sys_seconds local = sys_days{date} + hours{hh} + minutes{mm} + seconds{ss};
    return local - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp ts)
{
    using namespace std::chrono;
    const auto day_point = floor<days>(ts);
    const year_month_day date{day_point};
    const hh_mm_ss<seconds> tod{ts - day_point};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(date.year()),
                       static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()), tod.hours().count(),
                       tod.minutes().count(), tod.seconds().count());
}

std::string_view to_string(Action action) noexcept
{
    switch (action) {
    case Action::Root:
        return "root";
    case Action::Retweet:
        return "retweet";
    case Action::Quote:
        return "quote";
    case Action::Reply:
        return "reply";
    }
    return "unknown";
}

std::optional<Action> parse_action(std::string_view text) noexcept
{
    if (text == "root")
        return Action::Root;
    if (text == "retweet")
        return Action::Retweet;
    if (text == "quote")
        return Action::Quote;
    if (text == "reply")
        return Action::Reply;
    return std::nullopt;
}

std::optional<Activity> activity_of(Action action) noexcept
{
    switch (action) {
    case Action::Retweet:
        return Activity::Retweet;
    case Action::Quote:
        return Activity::Quote;
    case Action::Reply:
        return Activity::Reply;
    case Action::Root:
        break;
    }
    return std::nullopt;
}

namespace {

ojson event_to_json(const TweetEvent& event)
{
    ojson j;
    j["id"] = event.id;
    j["user_id"] = event.user_id;
    j["ts"] = format_timestamp(event.timestamp);
    j["action"] = std::string(to_string(event.action));
    if (event.parent_id)
        j["parent_id"] = *event.parent_id;
    return j;
}

std::string string_field(const ojson& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end())
        throw std::invalid_argument(fmt::format("missing key '{}'", key));
    if (!it->is_string())
        throw std::invalid_argument(fmt::format("key '{}' must be a string", key));
    return it->get<std::string>();
}

TweetEvent event_from_json(const ojson& j)
{
    if (!j.is_object())
        throw std::invalid_argument("record is not a JSON object");
    TweetEvent event;
    event.id = string_field(j, "id");
    if (event.id.empty())
        throw std::invalid_argument("empty event id");
    event.user_id = string_field(j, "user_id");
    event.timestamp = parse_timestamp(string_field(j, "ts"));
    const std::string action = string_field(j, "action");
    const auto parsed = parse_action(action);
    if (!parsed)
        throw std::invalid_argument(fmt::format("unknown action '{}'", action));
    event.action = *parsed;
    const bool has_parent = j.contains("parent_id") && !j.at("parent_id").is_null();
    if (has_parent) {
        event.parent_id = string_field(j, "parent_id");
        if (event.parent_id->empty())
            throw std::invalid_argument("empty parent_id");
    }
    if (event.action == Action::Root && has_parent)
        throw std::invalid_argument("root event must not carry parent_id");
    if (event.action != Action::Root && !has_parent)
        throw std::invalid_argument(fmt::format("{} event requires parent_id", action));
    return event;
}

} // namespace

std::string event_to_json_line(const TweetEvent& event)
{
    return event_to_json(event).dump();
}

TweetEvent event_from_json_line(std::string_view line)
{
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
        throw std::invalid_argument(fmt::format("invalid JSON: {}", e.what()));
    }
    return event_from_json(j);
}

ParseResult parse_events(std::istream& input, const ParseOptions& options)
{
    ParseResult result;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(input, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        TweetEvent event;
        try {
            event = event_from_json_line(line);
        } catch (const std::invalid_argument& e) {
            if (options.strict)
                throw ParseError(line_no, e.what());
            result.malformed.push_back({line_no, e.what()});
            continue;
        }
        if (!seen.insert(event.id).second)
            throw DuplicateIdError(event.id);
        result.events.push_back(std::move(event));
    }
    return result;
}

CascadeTree::CascadeTree(std::string root_id, std::map<std::string, CascadeNode> nodes)
    : root_id_(std::move(root_id)), nodes_(std::move(nodes))
{
    const auto root = nodes_.find(root_id_);
    if (root == nodes_.end())
        throw std::invalid_argument(fmt::format("cascade root '{}' missing from node map", root_id_));
    if (root->second.parent || root->second.depth != 0)
        throw std::invalid_argument("cascade root must have no parent and depth 0");
    for (const auto& [id, node] : nodes_) {
        if (id == root_id_)
            continue;
        if (!node.parent)
            throw std::invalid_argument(fmt::format("non-root node '{}' has no parent", id));
        const auto parent = nodes_.find(*node.parent);
        if (parent == nodes_.end())
            throw std::invalid_argument(fmt::format("parent '{}' of '{}' is not in the cascade", *node.parent, id));
        if (node.depth != parent->second.depth + 1)
            throw std::invalid_argument(fmt::format("inconsistent depth at '{}'", id));
        ++child_counts_[*node.parent];
    }
}

NodeRole CascadeTree::role(const std::string& id) const
{
    if (id == root_id_)
        return NodeRole::Root;
    if (!nodes_.contains(id))
        throw std::out_of_range(fmt::format("event '{}' is not in cascade '{}'", id, root_id_));
    return child_counts_.contains(id) ? NodeRole::Parent : NodeRole::Child;
}

std::vector<TweetEvent> CascadeTree::events() const
{
    std::vector<TweetEvent> out;
    out.reserve(nodes_.size());
    for (const auto& [id, node] : nodes_)
        out.push_back(node.event);
    std::stable_sort(out.begin(), out.end(),
                     [](const TweetEvent& a, const TweetEvent& b) { return a.timestamp < b.timestamp; });
    return out;
}

BuildResult build_cascades(std::span<const TweetEvent> events)
{
    constexpr std::size_t kUnresolved = static_cast<std::size_t>(-1);
    constexpr std::size_t kOrphan = static_cast<std::size_t>(-2);

    std::unordered_map<std::string_view, std::size_t> index;
    index.reserve(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (!index.emplace(events[k].id, k).second)
            throw DuplicateIdError(events[k].id);
    }

    // root_of[k]: index of the ROOT event k descends from, or kOrphan.
    std::vector<std::size_t> root_of(events.size(), kUnresolved);
    std::vector<std::size_t> depth(events.size(), 0);
    std::vector<char> on_path(events.size(), 0);
    std::vector<std::size_t> path;

    for (std::size_t start = 0; start < events.size(); ++start) {
        if (root_of[start] != kUnresolved)
            continue;
        path.clear();
        std::size_t cur = start;
        std::size_t anchor_root = kOrphan;
        std::size_t anchor_depth = 0;
        while (true) {
            if (root_of[cur] != kUnresolved) {
                anchor_root = root_of[cur];
                anchor_depth = depth[cur];
                break;
            }
            const TweetEvent& ev = events[cur];
            if (ev.action == Action::Root) {
                root_of[cur] = cur;
                depth[cur] = 0;
                anchor_root = cur;
                anchor_depth = 0;
                break;
            }
            on_path[cur] = 1;
            path.push_back(cur);
            const auto parent = ev.parent_id ? index.find(*ev.parent_id) : index.end();
            if (parent == index.end() || on_path[parent->second]) {
                anchor_root = kOrphan;
                break;
            }
            cur = parent->second;
        }
        // Unwind: path.back() is the child of the anchor.
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            on_path[*it] = 0;
            root_of[*it] = anchor_root;
            if (anchor_root != kOrphan)
                depth[*it] = ++anchor_depth;
        }
    }

    std::map<std::string, std::map<std::string, CascadeNode>> grouped;
    BuildResult result;
    for (std::size_t k = 0; k < events.size(); ++k) {
        if (root_of[k] == kOrphan) {
            result.orphans.push_back(events[k].id);
            continue;
        }
        const std::string& root_id = events[root_of[k]].id;
        grouped[root_id].emplace(events[k].id, CascadeNode{events[k], events[k].parent_id, depth[k]});
    }
    result.trees.reserve(grouped.size());
    for (auto& [root_id, nodes] : grouped)
        result.trees.emplace_back(root_id, std::move(nodes));
    std::sort(result.orphans.begin(), result.orphans.end());
    return result;
}

void ActivitySeries::validate() const
{
    const std::size_t n = n_obs();
    if (horizon_hours < 1)
        throw std::invalid_argument("activity series horizon must be at least one hour");
    if (total.size() != n)
        throw std::invalid_argument("total series length does not match horizon");
    for (const auto& channel : cumulative) {
        if (channel.size() != n)
            throw std::invalid_argument("activity series length does not match horizon");
        for (std::size_t j = 0; j < n; ++j) {
            if (channel[j] < 0 || (j > 0 && channel[j] < channel[j - 1]))
                throw std::invalid_argument("activity series must be non-negative and non-decreasing");
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (total[j] != cumulative[0][j] + cumulative[1][j] + cumulative[2][j])
            throw std::invalid_argument("total series is not the sum of the activity series");
    }
}

BinningResult binned_series(const CascadeTree& tree, std::optional<std::size_t> horizon_hours)
{
    if (horizon_hours && *horizon_hours < 1)
        throw std::invalid_argument("horizon must be at least one hour");
    const Timestamp t0 = tree.root().event.timestamp;

    struct Binned {
        std::size_t bin;
        Activity activity;
        const std::string* id;
    };
    std::vector<Binned> binned;
    std::vector<std::string> skewed;
    std::size_t last_bin = 0;
    for (const auto& [id, node] : tree.nodes()) {
        const auto activity = activity_of(node.event.action);
        if (!activity)
            continue;
        const auto offset = (node.event.timestamp - t0).count();
        if (offset < 0) {
            skewed.push_back(id);
            continue;
        }
        const auto bin = static_cast<std::size_t>(offset / 3600);
        last_bin = std::max(last_bin, bin);
        binned.push_back({bin, *activity, &id});
    }
    if (!skewed.empty())
        throw ClockSkewError(std::move(skewed));

    BinningResult result;
    ActivitySeries& s = result.series;
    s.t0 = t0;
    s.horizon_hours = horizon_hours.value_or(std::max<std::size_t>(1, last_bin));
    const std::size_t n = s.n_obs();
    for (auto& channel : s.cumulative)
        channel.assign(n, 0);
    for (const auto& b : binned) {
        if (b.bin > s.horizon_hours) {
            result.truncated.push_back(*b.id);
            continue;
        }
        ++s.cumulative[static_cast<std::size_t>(b.activity)][b.bin];
    }
    for (auto& channel : s.cumulative) {
        for (std::size_t j = 1; j < n; ++j)
            channel[j] += channel[j - 1];
    }
    s.total.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j)
        s.total[j] = s.cumulative[0][j] + s.cumulative[1][j] + s.cumulative[2][j];
    return result;
}

std::vector<CascadeTree> select_cascades(std::vector<CascadeTree> trees, std::size_t min_size,
                                         std::optional<std::size_t> top_k)
{
    std::erase_if(trees, [min_size](const CascadeTree& t) { return t.size() < min_size; });
    std::stable_sort(trees.begin(), trees.end(), [](const CascadeTree& a, const CascadeTree& b) {
        if (a.size() != b.size())
            return a.size() > b.size();
        return a.root_id() < b.root_id();
    });
    if (top_k && trees.size() > *top_k)
        trees.erase(trees.begin() + static_cast<std::ptrdiff_t>(*top_k), trees.end());
    return trees;
}

namespace {

ojson series_to_json(const ActivitySeries& s)
{
    ojson j;
    j["t0"] = format_timestamp(s.t0);
    j["retweet"] = s.channel(Activity::Retweet);
    j["quote"] = s.channel(Activity::Quote);
    j["reply"] = s.channel(Activity::Reply);
    j["total"] = s.total;
    return j;
}

ojson cascade_to_json(const CascadeTree& tree, const ActivitySeries& series)
{
    ojson j;
    j["root_id"] = tree.root_id();
    ojson events = ojson::array();
    for (const auto& e : tree.events())
        events.push_back(event_to_json(e));
    j["events"] = std::move(events);
    j["series"] = series_to_json(series);
    return j;
}

std::vector<std::int64_t> int_array(const ojson& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_array())
        throw std::invalid_argument(fmt::format("series key '{}' missing or not an array", key));
    std::vector<std::int64_t> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number_integer())
            throw std::invalid_argument(fmt::format("series '{}' must hold integers", key));
        out.push_back(v.get<std::int64_t>());
    }
    return out;
}

CascadeFile cascade_from_json(const ojson& j)
{
    if (!j.is_object())
        throw std::invalid_argument("cascade record is not a JSON object");
    const std::string root_id = string_field(j, "root_id");
    const auto events_it = j.find("events");
    if (events_it == j.end() || !events_it->is_array())
        throw std::invalid_argument("cascade 'events' missing or not an array");
    std::vector<TweetEvent> events;
    events.reserve(events_it->size());
    for (const auto& e : *events_it)
        events.push_back(event_from_json(e));
    auto built = build_cascades(events);
    if (built.trees.size() != 1 || !built.orphans.empty() || built.trees.front().root_id() != root_id)
        throw std::invalid_argument(fmt::format("cascade '{}' does not form a single rooted tree", root_id));

    const auto series_it = j.find("series");
    if (series_it == j.end() || !series_it->is_object())
        throw std::invalid_argument("cascade 'series' missing");
    ActivitySeries s;
    s.t0 = parse_timestamp(string_field(*series_it, "t0"));
    s.cumulative[0] = int_array(*series_it, "retweet");
    s.cumulative[1] = int_array(*series_it, "quote");
    s.cumulative[2] = int_array(*series_it, "reply");
    s.total = int_array(*series_it, "total");
    if (s.total.size() < 2)
        throw std::invalid_argument("series needs at least two observations");
    s.horizon_hours = s.total.size() - 1;
    s.validate();
    return {std::move(built.trees.front()), std::move(s)};
}

ojson parse_document(std::string_view text)
{
    try {
        return ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw std::invalid_argument(fmt::format("invalid cascade JSON: {}", e.what()));
    }
}

} // namespace

std::string write_cascade_file(const CascadeTree& tree, const ActivitySeries& series)
{
    return cascade_to_json(tree, series).dump(2) + "\n";
}

std::string write_cascade_bundle(std::span<const CascadeFile> cascades)
{
    ojson arr = ojson::array();
    for (const auto& c : cascades)
        arr.push_back(cascade_to_json(c.tree, c.series));
    return arr.dump(2) + "\n";
}

std::vector<CascadeFile> read_cascade_files(std::string_view text)
{
    const ojson doc = parse_document(text);
    std::vector<CascadeFile> out;
    if (doc.is_array()) {
        out.reserve(doc.size());
        for (const auto& item : doc)
            out.push_back(cascade_from_json(item));
    } else {
        out.push_back(cascade_from_json(doc));
    }
    return out;
}

CascadeFile read_cascade_file(std::string_view text)
{
    const ojson doc = parse_document(text);
    if (doc.is_array())
        throw std::invalid_argument("expected a single cascade object, found a bundle");
    return cascade_from_json(doc);
}

} // namespace cascadefit
