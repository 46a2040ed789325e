#pragma once

// Core domain types shared by the whole pipeline, plus run configuration.
// All types are immutable after construction and safe for concurrent reads.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taste/util.hpp"

namespace taste {

// Days since 1970-01-01 (UTC calendar date).
using Day = int32_t;

Day days_from_civil(int year, int month, int day);
void civil_from_days(Day z, int& year, int& month, int& day);
int year_of_day(Day z);

// "YYYY-MM-DD"
bool parse_date(std::string_view s, Day& out);
std::string format_date(Day d);

// "YYYY-MM-DDTHH:MM:SSZ", UTC, second resolution.
bool parse_timestamp(std::string_view s, int64_t& out);
std::string format_timestamp(int64_t unix_seconds);

inline Day day_of_timestamp(int64_t unix_seconds) {
  // Unix time has no leap seconds; floor handles pre-1970 instants.
  int64_t d = unix_seconds / 86400;
  if (unix_seconds % 86400 < 0) --d;
  return static_cast<Day>(d);
}

bool valid_region_code(std::string_view s);

struct ListenEvent {
  std::string listener_id;
  int64_t timestamp = 0;  // unix seconds UTC
  std::string artist_id;
  std::optional<int> release_year;        // absent = unknown
  std::optional<std::string> region_code;  // ^[A-Z]{2}$, absent = unknown
};

enum class Gender : uint8_t { M, F, X };

const char* gender_code(Gender g);
std::optional<Gender> parse_gender(std::string_view s);

struct ListenerMeta {
  std::string listener_id;
  Gender gender = Gender::X;
  int age_bucket = 0;  // start year of a 5-year birth-year bucket
};

enum class PeriodId : uint8_t { P1 = 0, P2 = 1, P3 = 2 };
inline constexpr int kPeriodCount = 3;
const char* period_name(PeriodId p);

struct SamplePeriod {
  PeriodId id = PeriodId::P1;
  Day start = 0;  // inclusive
  Day end = 0;    // inclusive
  std::vector<Day> sampled_days;  // sorted, unique, within [start, end]

  bool contains(Day d) const { return d >= start && d <= end; }
};

struct HolidayWindow {
  std::string id;
  Day start = 0;
  Day end = 0;  // inclusive; end - start + 1 == 5

  bool contains(Day d) const { return d >= start && d <= end; }
};

struct TasteProfile {
  std::string owner_id;
  std::string period;  // "P1", "P2", "P3" or "aggregate"
  std::vector<int64_t> counts;
  int64_t total = 0;

  // counts / total; all zeros when total == 0.
  std::vector<double> normalized() const;
};

TasteProfile make_profile(std::string owner, std::string period, std::vector<int64_t> counts);

// Rooted binary tree over genre leaves, ultrametric when built by UPGMA.
struct GenreTree {
  struct Node {
    int parent = -1;
    int left = -1;
    int right = -1;
    double height = 0.0;         // merge height; 0 for leaves
    double branch_length = 0.0;  // to parent; 0 for the root
    int genre = -1;              // leaf payload; -1 for internal nodes
  };

  std::vector<Node> nodes;
  int root = -1;

  int leaf_count() const;
  bool is_leaf(int i) const { return nodes[i].left < 0; }
  // Max deviation among root-to-leaf path lengths (0 for ultrametric trees).
  double ultrametric_error() const;

  std::string to_newick() const;
  static GenreTree from_newick(std::string_view text);

  bool operator==(const GenreTree&) const = default;
};

struct GenreTaxonomy {
  int k = 0;
  std::map<std::string, int> artist_to_genre;
  std::vector<std::string> genre_labels;
  Matrix genre_distance;  // K x K correlation distances
  GenreTree tree;
};

struct RunConfig {
  uint64_t seed = 1;

  std::array<std::pair<Day, Day>, kPeriodCount> period_ranges;
  std::vector<HolidayWindow> holidays;
  int sampled_days_per_period = 9;

  int session_gap_minutes = 30;
  bool include_self_transitions = false;
  int k_genres = 200;
  int top_n_artists = 10000;
  int min_streams_per_profile = 200;
  int pairs_per_stratum_sample = 1000;

  int reference_year = 0;  // 0 = max event year
  int min_cell_streams = 50;
  bool zscore_within_rows = false;
  bool unifrac_normalized = false;

  std::vector<int> rarefaction_depths = {10, 25, 50, 100, 200, 400};
  int rarefaction_reps = 50;
  int rarefaction_sample = 500;

  RunConfig();
};

// Synthetic-population knobs; used only by the synth module.
struct SynthConfig {
  int regions = 8;
  int genres = 20;
  int artists_per_genre = 10;
  int listeners_per_region = 500;
  double concentration = 0.5;          // Dirichlet parameter for region profiles
  double region_weight = 0.7;          // lambda: weight on region profile vs personal noise
  double mover_fraction = 0.1;         // relocates between P1 and P2
  double past_mover_fraction = 0.1;    // relocated before P1; holidays reveal origin
  double adoption = 0.5;               // alpha: post-move weight on destination
  double holiday_travel_prob = 0.9;    // mover returns home for a given holiday
  double nonmover_holiday_travel_prob = 0.0;
  double streams_per_period_mean = 60.0;  // Poisson
  double streams_per_holiday_mean = 15.0;
  double session_mean_length = 6.0;
  double zipf_exponent = 0.0;  // 0 = uniform artist popularity within genre
  double tag_coverage = 0.8;
  double adolescence_affinity = 0.0;
  double recency_decay = 0.25;  // geometric parameter for baseline song age
  std::vector<int> age_buckets = {1975, 1980, 1985, 1990, 1995, 2000};
  bool disjoint_region_genres = false;
  uint64_t plant_seed = 0;  // 0 = reuse the run seed
};

struct Config {
  RunConfig run;
  SynthConfig synth;
};

// Key-value config file. Unknown keys are errors; '#' starts a comment.
Config parse_config_text(std::string_view text);
Config load_config(const std::string& path);
// Canonical dump; parse(dump(c)) reproduces c exactly.
std::string dump_config(const Config& c);

// Every violated invariant, as human-readable messages; empty when valid.
std::vector<std::string> validate_config(const Config& c);

// Sampled days for one period: a fixed draw from (seed, period id), shared by
// all listeners in the run.
SamplePeriod make_sample_period(PeriodId id, std::pair<Day, Day> range, int days, uint64_t seed);
std::array<SamplePeriod, kPeriodCount> make_sample_periods(const RunConfig& cfg);

}  // namespace taste
