#include "taste/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <unordered_map>

namespace taste {

namespace {

constexpr const char* kEventHeader = "listener_id\ttimestamp\tartist_id\trelease_year\tregion_code";
constexpr const char* kMetaHeader = "listener_id\tgender_code\tage_bucket_start";

// Reads a file line by line through a reusable buffer; avoids istream
// overhead on multi-million-line logs.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : file_(std::fopen(path.c_str(), "rb")) {
    if (!file_) throw IoError("cannot open file: " + path);
    buf_.resize(1 << 20);
  }
  ~LineReader() {
    if (file_) std::fclose(file_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  // Returns false at EOF. The returned view is valid until the next call.
  bool next(std::string_view& line) {
    carry_.clear();
    while (true) {
      if (pos_ < filled_) {
        char* nl = static_cast<char*>(std::memchr(buf_.data() + pos_, '\n', filled_ - pos_));
        if (nl) {
          size_t len = nl - (buf_.data() + pos_);
          if (carry_.empty()) {
            line = {buf_.data() + pos_, len};
          } else {
            carry_.append(buf_.data() + pos_, len);
            line = carry_;
          }
          pos_ += len + 1;
          strip_cr(line);
          return true;
        }
        carry_.append(buf_.data() + pos_, filled_ - pos_);
        pos_ = filled_;
      }
      filled_ = std::fread(buf_.data(), 1, buf_.size(), file_);
      pos_ = 0;
      if (filled_ == 0) {
        if (carry_.empty()) return false;
        line = carry_;
        strip_cr(line);
        return true;
      }
    }
  }

 private:
  static void strip_cr(std::string_view& line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  }

  std::FILE* file_ = nullptr;
  std::vector<char> buf_;
  std::string carry_;
  size_t pos_ = 0;
  size_t filled_ = 0;
};

// Splits into exactly `n` tab-separated fields; returns false otherwise.
bool split_fields(std::string_view line, std::string_view* out, int n) {
  int i = 0;
  size_t start = 0;
  while (i < n - 1) {
    size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) return false;
    out[i++] = line.substr(start, tab - start);
    start = tab + 1;
  }
  std::string_view last = line.substr(start);
  if (last.find('\t') != std::string_view::npos) return false;
  out[i] = last;
  return true;
}

void note_malformed(ParseStats& stats, std::string_view line, const char* what) {
  ++stats.malformed;
  if (stats.malformed_samples.size() < 5) {
    // Header is file line 1; data line k is file line k + 1.
    stats.malformed_samples.push_back("line " + std::to_string(stats.lines + 1) + " (" + what + "): " +
                                      std::string(line.substr(0, 120)));
  }
}

void check_malformed_rate(const ParseStats& stats, const std::string& path) {
  if (stats.lines > 0 && static_cast<double>(stats.malformed) > 0.01 * static_cast<double>(stats.lines)) {
    std::string msg = path + ": " + std::to_string(stats.malformed) + " of " + std::to_string(stats.lines) +
                      " lines malformed (>1%)";
    for (const auto& s : stats.malformed_samples) msg += "\n  " + s;
    throw IoError(msg);
  }
}

constexpr int kMinReleaseYear = 1900;
constexpr int kMaxReleaseYear = 2100;  // structural bound; the analysis
                                       // reference year is validated downstream

struct StringHash {
  using is_transparent = void;
  size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  size_t operator()(const std::string& s) const { return std::hash<std::string_view>{}(s); }
};

class Interner {
 public:
  uint32_t intern(std::string_view s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(values_.size());
    values_.emplace_back(s);
    index_.emplace(values_.back(), id);
    return id;
  }
  std::vector<std::string> take() { return std::move(values_); }

 private:
  std::unordered_map<std::string, uint32_t, StringHash, std::equal_to<>> index_;
  std::vector<std::string> values_;
};

// Index remap that turns a first-seen dictionary into a sorted one.
struct SortedDict {
  std::vector<std::string> values;   // sorted
  std::vector<uint32_t> old_to_new;  // index by first-seen id

  explicit SortedDict(const std::vector<std::string>& first_seen) {
    std::vector<uint32_t> order(first_seen.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](uint32_t a, uint32_t b) { return first_seen[a] < first_seen[b]; });
    values.reserve(first_seen.size());
    old_to_new.resize(first_seen.size());
    for (uint32_t rank = 0; rank < order.size(); ++rank) {
      old_to_new[order[rank]] = rank;
      values.push_back(first_seen[order[rank]]);
    }
  }
};

}  // namespace

ParseStats parse_events(const std::string& path, const std::function<void(ListenEvent&&)>& sink) {
  LineReader reader(path);
  std::string_view line;
  if (!reader.next(line) || line != kEventHeader) {
    throw IoError(path + ": missing or wrong event header");
  }
  ParseStats stats;
  std::string_view f[5];
  while (reader.next(line)) {
    ++stats.lines;
    if (line.empty()) {
      note_malformed(stats, line, "empty line");
      continue;
    }
    if (!split_fields(line, f, 5)) {
      note_malformed(stats, line, "wrong field count");
      continue;
    }
    ListenEvent ev;
    if (f[0].empty()) {
      note_malformed(stats, line, "empty listener_id");
      continue;
    }
    if (!parse_timestamp(f[1], ev.timestamp)) {
      note_malformed(stats, line, "bad timestamp");
      continue;
    }
    if (f[2].empty()) {
      note_malformed(stats, line, "empty artist_id");
      continue;
    }
    ev.listener_id = std::string(f[0]);
    ev.artist_id = std::string(f[2]);
    if (!f[3].empty()) {
      int64_t year;
      if (parse_int64(f[3], year) && year >= kMinReleaseYear && year <= kMaxReleaseYear) {
        ev.release_year = static_cast<int>(year);
      } else {
        note_malformed(stats, line, "bad release_year");
      }
    }
    if (!f[4].empty()) {
      if (valid_region_code(f[4])) {
        ev.region_code = std::string(f[4]);
      } else {
        note_malformed(stats, line, "bad region_code");
      }
    }
    ++stats.events;
    sink(std::move(ev));
  }
  check_malformed_rate(stats, path);
  return stats;
}

EventTable load_events(const std::string& path) {
  EventTable table;
  Interner listeners, artists, regions;
  int32_t file_index = 0;
  table.stats = parse_events(path, [&](ListenEvent&& ev) {
    EventTable::Row row;
    row.timestamp = ev.timestamp;
    row.listener = listeners.intern(ev.listener_id);
    row.artist = artists.intern(ev.artist_id);
    row.file_index = file_index++;
    row.release_year = ev.release_year ? static_cast<int16_t>(*ev.release_year) : int16_t{-1};
    row.region = ev.region_code ? static_cast<int16_t>(regions.intern(*ev.region_code)) : int16_t{-1};
    table.rows.push_back(row);
  });
  table.listener_ids = listeners.take();
  table.artist_ids = artists.take();
  table.region_codes = regions.take();
  return table;
}

MetaTable load_listener_meta(const std::string& path) {
  LineReader reader(path);
  std::string_view line;
  if (!reader.next(line) || line != kMetaHeader) {
    throw IoError(path + ": missing or wrong metadata header");
  }
  MetaTable table;
  ParseStats stats;
  std::string_view f[3];
  while (reader.next(line)) {
    ++stats.lines;
    if (!split_fields(line, f, 3) || f[0].empty()) {
      note_malformed(stats, line, "bad metadata line");
      continue;
    }
    auto gender = parse_gender(f[1]);
    int64_t bucket;
    if (!gender || !parse_int64(f[2], bucket) || bucket % 5 != 0) {
      note_malformed(stats, line, "bad gender or age bucket");
      continue;
    }
    table.listeners.push_back({std::string(f[0]), *gender, static_cast<int>(bucket)});
  }
  check_malformed_rate(stats, path);
  std::sort(table.listeners.begin(), table.listeners.end(),
            [](const ListenerMeta& a, const ListenerMeta& b) { return a.listener_id < b.listener_id; });
  // First entry wins on duplicates.
  table.listeners.erase(std::unique(table.listeners.begin(), table.listeners.end(),
                                    [](const ListenerMeta& a, const ListenerMeta& b) {
                                      return a.listener_id == b.listener_id;
                                    }),
                        table.listeners.end());
  table.malformed = stats.malformed;
  return table;
}

std::optional<std::string> modal_region(const std::map<std::string, int64_t>& region_counts) {
  const std::string* best = nullptr;
  int64_t best_count = 0;
  bool tied = false;
  for (const auto& [region, count] : region_counts) {
    if (count > best_count) {
      best = &region;
      best_count = count;
      tied = false;
    } else if (count == best_count && best != nullptr) {
      tied = true;
    }
  }
  if (!best || tied) return std::nullopt;
  return *best;
}

namespace {

// (listener, slot, region) observation; slots are periods then holidays.
struct LocCell {
  uint32_t listener;
  uint16_t slot;
  uint16_t region;
};

}  // namespace

std::vector<LocationSummary> compute_location_summaries(const EventTable& events,
                                                        const std::array<SamplePeriod, kPeriodCount>& periods,
                                                        std::span<const HolidayWindow> holidays) {
  std::array<std::set<Day>, kPeriodCount> sampled;
  for (int p = 0; p < kPeriodCount; ++p) {
    sampled[p] = std::set<Day>(periods[p].sampled_days.begin(), periods[p].sampled_days.end());
  }

  std::vector<LocCell> cells;
  for (const auto& row : events.rows) {
    if (row.region < 0) continue;
    Day d = events.day(row);
    for (uint16_t p = 0; p < kPeriodCount; ++p) {
      if (sampled[p].count(d)) cells.push_back({row.listener, p, static_cast<uint16_t>(row.region)});
    }
    for (size_t h = 0; h < holidays.size(); ++h) {
      if (holidays[h].contains(d)) {
        cells.push_back({row.listener, static_cast<uint16_t>(kPeriodCount + h), static_cast<uint16_t>(row.region)});
      }
    }
  }
  std::sort(cells.begin(), cells.end(), [](const LocCell& a, const LocCell& b) {
    return std::tie(a.listener, a.slot, a.region) < std::tie(b.listener, b.slot, b.region);
  });

  std::vector<LocationSummary> out(events.listener_ids.size());
  for (size_t l = 0; l < out.size(); ++l) {
    out[l].listener_id = events.listener_ids[l];
    out[l].holiday_region.assign(holidays.size(), kAbsent);
  }

  // Walk (listener, slot) groups; within a group, runs of equal region.
  size_t i = 0;
  while (i < cells.size()) {
    size_t group_end = i;
    while (group_end < cells.size() && cells[group_end].listener == cells[i].listener &&
           cells[group_end].slot == cells[i].slot) {
      ++group_end;
    }
    int best_region = -1;
    int64_t best_count = 0;
    bool tied = false;
    size_t j = i;
    while (j < group_end) {
      size_t run_end = j;
      while (run_end < group_end && cells[run_end].region == cells[j].region) ++run_end;
      int64_t count = static_cast<int64_t>(run_end - j);
      if (count > best_count) {
        best_region = cells[j].region;
        best_count = count;
        tied = false;
      } else if (count == best_count) {
        tied = true;
      }
      j = run_end;
    }
    std::string modal = tied ? kAmbiguous : events.region_codes[best_region];
    auto& summary = out[cells[i].listener];
    if (cells[i].slot < kPeriodCount) {
      summary.period_region[cells[i].slot] = modal;
    } else {
      summary.holiday_region[cells[i].slot - kPeriodCount] = modal;
    }
    i = group_end;
  }

  std::sort(out.begin(), out.end(),
            [](const LocationSummary& a, const LocationSummary& b) { return a.listener_id < b.listener_id; });
  return out;
}

std::map<std::string, PeriodAggregate> aggregate_period(const EventTable& events, const SamplePeriod& period) {
  std::set<Day> sampled(period.sampled_days.begin(), period.sampled_days.end());
  std::map<std::string, PeriodAggregate> out;
  for (const auto& row : events.rows) {
    if (!sampled.count(events.day(row))) continue;
    PeriodAggregate& agg = out[events.listener_ids[row.listener]];
    agg.artist_counts[events.artist_ids[row.artist]] += 1;
    if (row.region >= 0) agg.region_counts[events.region_codes[row.region]] += 1;
    if (row.release_year >= 0) agg.release_year_counts[row.release_year] += 1;
  }
  return out;
}

std::vector<std::array<int64_t, kPeriodCount>> AggregateStore::stream_totals() const {
  std::vector<std::array<int64_t, kPeriodCount>> totals(listener_ids.size(), {0, 0, 0});
  for (const auto& row : artists) totals[row.listener][row.period] += row.count;
  return totals;
}

AggregateStore aggregate_all_periods(const EventTable& events,
                                     const std::array<SamplePeriod, kPeriodCount>& periods) {
  std::array<std::set<Day>, kPeriodCount> sampled;
  for (int p = 0; p < kPeriodCount; ++p) {
    sampled[p] = std::set<Day>(periods[p].sampled_days.begin(), periods[p].sampled_days.end());
  }

  SortedDict listeners(events.listener_ids);
  SortedDict artists(events.artist_ids);
  SortedDict regions(events.region_codes);

  struct Cell {
    uint32_t listener;
    uint8_t period;
    uint32_t key;
  };
  std::vector<Cell> artist_cells, region_cells, year_cells;
  artist_cells.reserve(events.rows.size());
  for (const auto& row : events.rows) {
    Day d = events.day(row);
    for (uint8_t p = 0; p < kPeriodCount; ++p) {
      if (!sampled[p].count(d)) continue;
      uint32_t listener = listeners.old_to_new[row.listener];
      artist_cells.push_back({listener, p, artists.old_to_new[row.artist]});
      if (row.region >= 0) region_cells.push_back({listener, p, regions.old_to_new[row.region]});
      if (row.release_year >= 0) year_cells.push_back({listener, p, static_cast<uint32_t>(row.release_year)});
    }
  }

  AggregateStore store;
  store.listener_ids = std::move(listeners.values);
  store.artist_ids = std::move(artists.values);
  store.region_codes = std::move(regions.values);

  auto run_length = [](std::vector<Cell>& cells, std::vector<AggregateStore::Row>& out) {
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
      return std::tie(a.listener, a.period, a.key) < std::tie(b.listener, b.period, b.key);
    });
    size_t i = 0;
    while (i < cells.size()) {
      size_t j = i;
      while (j < cells.size() && cells[j].listener == cells[i].listener && cells[j].period == cells[i].period &&
             cells[j].key == cells[i].key) {
        ++j;
      }
      out.push_back({cells[i].listener, cells[i].period, cells[i].key, static_cast<int64_t>(j - i)});
      i = j;
    }
  };
  run_length(artist_cells, store.artists);
  run_length(region_cells, store.regions);
  run_length(year_cells, store.years);
  return store;
}

const char* exclusion_reason_name(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::kLowActivity: return "low activity";
    case ExclusionReason::kIncompleteMetadata: return "incomplete metadata";
    default: return "unreliable location";
  }
}

FilterResult filter_listeners(const AggregateStore& aggregates, const MetaTable& meta,
                              std::span<const LocationSummary> summaries, const RunConfig& cfg) {
  auto totals = aggregates.stream_totals();

  // meta.listeners and summaries are sorted by listener_id, as is the store
  // dictionary; advance cursors in lockstep.
  size_t mi = 0, si = 0;
  FilterResult result;
  for (size_t l = 0; l < aggregates.listener_ids.size(); ++l) {
    const std::string& listener = aggregates.listener_ids[l];
    bool active = true;
    for (int p = 0; p < kPeriodCount; ++p) {
      if (totals[l][p] < cfg.min_streams_per_profile) active = false;
    }
    if (!active) {
      result.excluded.emplace_back(listener, ExclusionReason::kLowActivity);
      continue;
    }
    while (mi < meta.listeners.size() && meta.listeners[mi].listener_id < listener) ++mi;
    bool has_meta = mi < meta.listeners.size() && meta.listeners[mi].listener_id == listener;
    if (!has_meta) {
      result.excluded.emplace_back(listener, ExclusionReason::kIncompleteMetadata);
      continue;
    }
    while (si < summaries.size() && summaries[si].listener_id < listener) ++si;
    bool located = si < summaries.size() && summaries[si].listener_id == listener;
    if (located) {
      for (int p = 0; p < 2; ++p) {  // P1 and P2 must be unambiguous
        const std::string& r = summaries[si].period_region[p];
        if (r == kAbsent || r == kAmbiguous) located = false;
      }
    }
    if (!located) {
      result.excluded.emplace_back(listener, ExclusionReason::kUnreliableLocation);
      continue;
    }
    result.eligible.push_back(listener);
  }
  return result;
}

}  // namespace taste
