#pragma once

// Event-log and metadata ingestion: parsing, listener filtering, per-period
// aggregation, and modal/holiday location inference.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "taste/model.hpp"

namespace taste {

struct ParseStats {
  int64_t lines = 0;      // data lines (header excluded)
  int64_t events = 0;     // events yielded
  int64_t malformed = 0;  // dropped lines + recoverable field errors
  std::vector<std::string> malformed_samples;  // up to 5, with line numbers
};

// Streaming parser; yields events in file order. Lines with an unparseable
// required field are dropped and counted; bad optional fields degrade to
// unknown and still count as malformed. Throws IoError on an unreadable
// file, a wrong header, or a malformed rate above 1%.
ParseStats parse_events(const std::string& path, const std::function<void(ListenEvent&&)>& sink);

// Columnar events with interned ids. Dictionary order is first appearance;
// everything derived downstream is keyed or re-sorted by the id strings, so
// results do not depend on file order.
struct EventTable {
  std::vector<std::string> listener_ids;
  std::vector<std::string> artist_ids;
  std::vector<std::string> region_codes;

  struct Row {
    int64_t timestamp = 0;
    uint32_t listener = 0;
    uint32_t artist = 0;
    int32_t file_index = 0;
    int16_t release_year = -1;  // -1 = unknown
    int16_t region = -1;        // index into region_codes; -1 = unknown
  };
  std::vector<Row> rows;
  ParseStats stats;

  Day day(const Row& r) const { return day_of_timestamp(r.timestamp); }
};

EventTable load_events(const std::string& path);

struct MetaTable {
  std::vector<ListenerMeta> listeners;  // sorted by listener_id, unique
  int64_t malformed = 0;
};

MetaTable load_listener_meta(const std::string& path);

// Strict plurality region; nullopt when the top count is tied or the map is
// empty. Scale-invariant by construction.
std::optional<std::string> modal_region(const std::map<std::string, int64_t>& region_counts);

// Location summary sentinel values (region codes are always two capitals).
inline constexpr const char* kAmbiguous = "-";
inline constexpr const char* kAbsent = "";

struct LocationSummary {
  std::string listener_id;
  // Modal streaming region per period over sampled days; kAmbiguous on a tie,
  // kAbsent with no streams.
  std::array<std::string, kPeriodCount> period_region = {kAbsent, kAbsent, kAbsent};
  // Modal region over each 5-day holiday window (all days, not sampled days).
  std::vector<std::string> holiday_region;
};

// One summary per listener appearing in the events, sorted by listener_id.
std::vector<LocationSummary> compute_location_summaries(const EventTable& events,
                                                        const std::array<SamplePeriod, kPeriodCount>& periods,
                                                        std::span<const HolidayWindow> holidays);

struct PeriodAggregate {
  std::map<std::string, int64_t> artist_counts;
  std::map<std::string, int64_t> region_counts;
  std::map<int, int64_t> release_year_counts;
};

// Counts restricted to the period's sampled days; keys with zero count are
// absent. Order-insensitive in the input events.
std::map<std::string, PeriodAggregate> aggregate_period(const EventTable& events, const SamplePeriod& period);

// Compact all-periods aggregate used by the pipeline and the on-disk format.
// Dictionaries are sorted, so index order equals string order and integer
// sorts yield the canonical layout.
struct AggregateStore {
  std::vector<std::string> listener_ids;  // sorted unique; includes listeners
                                          // with zero sampled-day streams
  std::vector<std::string> artist_ids;    // sorted unique
  std::vector<std::string> region_codes;  // sorted unique

  struct Row {
    uint32_t listener = 0;
    uint8_t period = 0;  // 0..2
    uint32_t key = 0;    // artist index / region index / calendar year
    int64_t count = 0;
  };
  std::vector<Row> artists;
  std::vector<Row> regions;
  std::vector<Row> years;

  // Sampled-day stream totals per (listener, period).
  std::vector<std::array<int64_t, kPeriodCount>> stream_totals() const;
};

AggregateStore aggregate_all_periods(const EventTable& events,
                                     const std::array<SamplePeriod, kPeriodCount>& periods);

enum class ExclusionReason { kLowActivity, kIncompleteMetadata, kUnreliableLocation };
const char* exclusion_reason_name(ExclusionReason r);

struct FilterResult {
  std::vector<std::string> eligible;  // sorted
  std::vector<std::pair<std::string, ExclusionReason>> excluded;  // sorted by id
};

// Keeps listeners with >= min_streams_per_profile streams on sampled days in
// every period, complete metadata, and an unambiguous modal region in P1 and
// P2. Reasons follow that priority order.
FilterResult filter_listeners(const AggregateStore& aggregates, const MetaTable& meta,
                              std::span<const LocationSummary> summaries, const RunConfig& cfg);

}  // namespace taste
