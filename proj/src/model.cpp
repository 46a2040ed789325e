#include "taste/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "taste/rng.hpp"

namespace taste {

// Howard Hinnant's civil-date algorithms.
Day days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

void civil_from_days(Day z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = yr + (m <= 2);
}

int year_of_day(Day z) {
  int y, m, d;
  civil_from_days(z, y, m, d);
  return y;
}

namespace {

bool parse_fixed_int(std::string_view s, size_t pos, size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (size_t i = pos; i < pos + len; ++i) {
    char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

bool valid_ymd(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1) return false;
  static const int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int dm = mdays[m - 1];
  if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) dm = 29;
  return d <= dm;
}

}  // namespace

bool parse_date(std::string_view s, Day& out) {
  int y, m, d;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  if (!parse_fixed_int(s, 0, 4, y) || !parse_fixed_int(s, 5, 2, m) || !parse_fixed_int(s, 8, 2, d)) return false;
  if (!valid_ymd(y, m, d)) return false;
  out = days_from_civil(y, m, d);
  return true;
}

std::string format_date(Day day) {
  int y, m, d;
  civil_from_days(day, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

bool parse_timestamp(std::string_view s, int64_t& out) {
  if (s.size() != 20 || s[10] != 'T' || s[13] != ':' || s[16] != ':' || s[19] != 'Z') return false;
  Day day;
  if (!parse_date(s.substr(0, 10), day)) return false;
  int hh, mm, ss;
  if (!parse_fixed_int(s, 11, 2, hh) || !parse_fixed_int(s, 14, 2, mm) || !parse_fixed_int(s, 17, 2, ss)) return false;
  if (hh > 23 || mm > 59 || ss > 59) return false;
  out = static_cast<int64_t>(day) * 86400 + hh * 3600 + mm * 60 + ss;
  return true;
}

std::string format_timestamp(int64_t t) {
  Day day = day_of_timestamp(t);
  int64_t rem = t - static_cast<int64_t>(day) * 86400;
  int y, m, d;
  civil_from_days(day, y, m, d);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

bool valid_region_code(std::string_view s) {
  return s.size() == 2 && s[0] >= 'A' && s[0] <= 'Z' && s[1] >= 'A' && s[1] <= 'Z';
}

const char* gender_code(Gender g) {
  switch (g) {
    case Gender::M: return "M";
    case Gender::F: return "F";
    default: return "X";
  }
}

std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "M") return Gender::M;
  if (s == "F") return Gender::F;
  if (s == "X") return Gender::X;
  return std::nullopt;
}

const char* period_name(PeriodId p) {
  switch (p) {
    case PeriodId::P1: return "P1";
    case PeriodId::P2: return "P2";
    default: return "P3";
  }
}

std::vector<double> TasteProfile::normalized() const {
  std::vector<double> out(counts.size(), 0.0);
  if (total > 0) {
    for (size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return out;
}

TasteProfile make_profile(std::string owner, std::string period, std::vector<int64_t> counts) {
  TasteProfile p;
  p.owner_id = std::move(owner);
  p.period = std::move(period);
  p.counts = std::move(counts);
  p.total = 0;
  for (int64_t c : p.counts) p.total += c;
  return p;
}

int GenreTree::leaf_count() const {
  int n = 0;
  for (const auto& node : nodes) {
    if (node.left < 0) ++n;
  }
  return n;
}

double GenreTree::ultrametric_error() const {
  if (root < 0) return 0.0;
  double min_depth = std::numeric_limits<double>::infinity();
  double max_depth = -min_depth;
  // Depth of each node = sum of branch lengths from the root.
  std::vector<double> depth(nodes.size(), 0.0);
  std::function<void(int)> walk = [&](int i) {
    if (nodes[i].left < 0) {
      min_depth = std::min(min_depth, depth[i]);
      max_depth = std::max(max_depth, depth[i]);
      return;
    }
    depth[nodes[i].left] = depth[i] + nodes[nodes[i].left].branch_length;
    depth[nodes[i].right] = depth[i] + nodes[nodes[i].right].branch_length;
    walk(nodes[i].left);
    walk(nodes[i].right);
  };
  walk(root);
  return max_depth - min_depth;
}

std::string GenreTree::to_newick() const {
  std::string out;
  std::function<void(int)> emit = [&](int i) {
    const Node& n = nodes[i];
    if (n.left < 0) {
      out += std::to_string(n.genre);
    } else {
      out.push_back('(');
      emit(n.left);
      out.push_back(':');
      out += format_double(nodes[n.left].branch_length);
      out.push_back(',');
      emit(n.right);
      out.push_back(':');
      out += format_double(nodes[n.right].branch_length);
      out.push_back(')');
    }
  };
  if (root >= 0) emit(root);
  out.push_back(';');
  return out;
}

namespace {

struct NewickParser {
  std::string_view text;
  size_t pos = 0;
  GenreTree tree;

  [[noreturn]] void fail(const std::string& what) { throw IoError("newick parse error at " + std::to_string(pos) + ": " + what); }

  char peek() {
    if (pos >= text.size()) fail("unexpected end");
    return text[pos];
  }

  int parse_subtree() {
    if (peek() == '(') {
      ++pos;
      int left = parse_subtree();
      expect(':');
      nodes_branch(left);
      expect(',');
      int right = parse_subtree();
      expect(':');
      nodes_branch(right);
      expect(')');
      GenreTree::Node n;
      n.left = left;
      n.right = right;
      int id = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(n);
      tree.nodes[left].parent = id;
      tree.nodes[right].parent = id;
      // Heights are not serialized; rebuild from child branch lengths.
      tree.nodes[id].height = std::max(tree.nodes[left].height + tree.nodes[left].branch_length,
                                       tree.nodes[right].height + tree.nodes[right].branch_length);
      return id;
    }
    size_t start = pos;
    while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])))) ++pos;
    if (pos == start) fail("expected leaf index");
    GenreTree::Node n;
    int64_t genre;
    if (!parse_int64(text.substr(start, pos - start), genre)) fail("bad leaf index");
    n.genre = static_cast<int>(genre);
    tree.nodes.push_back(n);
    return static_cast<int>(tree.nodes.size()) - 1;
  }

  void nodes_branch(int node) {
    size_t start = pos;
    while (pos < text.size() && text[pos] != ',' && text[pos] != ')' && text[pos] != ';') ++pos;
    double len;
    if (!parse_double(text.substr(start, pos - start), len)) fail("bad branch length");
    tree.nodes[node].branch_length = len;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
};

}  // namespace

GenreTree GenreTree::from_newick(std::string_view text) {
  NewickParser p;
  p.text = text;
  p.tree.root = p.parse_subtree();
  if (p.pos >= text.size() || text[p.pos] != ';') p.fail("expected ';'");
  return std::move(p.tree);
}

RunConfig::RunConfig() {
  period_ranges[0] = {days_from_civil(2017, 3, 1), days_from_civil(2017, 5, 31)};
  period_ranges[1] = {days_from_civil(2017, 9, 1), days_from_civil(2017, 11, 30)};
  period_ranges[2] = {days_from_civil(2017, 12, 1), days_from_civil(2018, 2, 28)};
  holidays = {
      {"xmas2016", days_from_civil(2016, 12, 23), days_from_civil(2016, 12, 27)},
      {"thanksgiving2017", days_from_civil(2017, 11, 21), days_from_civil(2017, 11, 25)},
      {"xmas2017", days_from_civil(2017, 12, 23), days_from_civil(2017, 12, 27)},
  };
}

namespace {

std::string format_range(std::pair<Day, Day> r) { return format_date(r.first) + ".." + format_date(r.second); }

bool parse_range(std::string_view v, std::pair<Day, Day>& out) {
  size_t sep = v.find("..");
  if (sep == std::string_view::npos) return false;
  return parse_date(v.substr(0, sep), out.first) && parse_date(v.substr(sep + 2), out.second);
}

std::string format_int_list(std::span<const int> xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(xs[i]);
  }
  return out;
}

bool parse_int_list(std::string_view v, std::vector<int>& out) {
  out.clear();
  if (v.empty()) return true;
  for (auto part : split(v, ',')) {
    int64_t x;
    if (!parse_int64(part, x)) return false;
    out.push_back(static_cast<int>(x));
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

// Config keys are registered in one table used by both the parser and the
// canonical dump, so the two cannot drift apart.
namespace {

struct ConfigKey {
  const char* name;
  bool (*set)(Config&, std::string_view);
  std::string (*get)(const Config&);
};

#define INT_KEY(NAME, FIELD)                                       \
  ConfigKey{NAME,                                                  \
            [](Config& c, std::string_view v) {                    \
              int64_t x;                                           \
              if (!parse_int64(v, x)) return false;                \
              c.FIELD = static_cast<decltype(c.FIELD)>(x);         \
              return true;                                         \
            },                                                     \
            [](const Config& c) { return std::to_string(c.FIELD); }}

#define UINT64_KEY(NAME, FIELD)                                    \
  ConfigKey{NAME,                                                  \
            [](Config& c, std::string_view v) {                    \
              int64_t x;                                           \
              if (!parse_int64(v, x) || x < 0) return false;       \
              c.FIELD = static_cast<uint64_t>(x);                  \
              return true;                                         \
            },                                                     \
            [](const Config& c) { return std::to_string(c.FIELD); }}

#define DOUBLE_KEY(NAME, FIELD)                                    \
  ConfigKey{NAME,                                                  \
            [](Config& c, std::string_view v) {                    \
              double x;                                            \
              if (!parse_double(v, x)) return false;               \
              c.FIELD = x;                                         \
              return true;                                         \
            },                                                     \
            [](const Config& c) { return format_double(c.FIELD); }}

#define BOOL_KEY(NAME, FIELD)                                             \
  ConfigKey{NAME,                                                         \
            [](Config& c, std::string_view v) {                           \
              if (v == "true") c.FIELD = true;                            \
              else if (v == "false") c.FIELD = false;                     \
              else return false;                                          \
              return true;                                                \
            },                                                            \
            [](const Config& c) { return std::string(c.FIELD ? "true" : "false"); }}

#define INTLIST_KEY(NAME, FIELD)                                   \
  ConfigKey{NAME,                                                  \
            [](Config& c, std::string_view v) { return parse_int_list(v, c.FIELD); }, \
            [](const Config& c) { return format_int_list(c.FIELD); }}

#define PERIOD_KEY(NAME, INDEX)                                                        \
  ConfigKey{NAME,                                                                      \
            [](Config& c, std::string_view v) { return parse_range(v, c.run.period_ranges[INDEX]); }, \
            [](const Config& c) { return format_range(c.run.period_ranges[INDEX]); }}

const ConfigKey kConfigKeys[] = {
    UINT64_KEY("seed", run.seed),
    PERIOD_KEY("period.p1", 0),
    PERIOD_KEY("period.p2", 1),
    PERIOD_KEY("period.p3", 2),
    INT_KEY("sampled_days_per_period", run.sampled_days_per_period),
    INT_KEY("session_gap_minutes", run.session_gap_minutes),
    BOOL_KEY("include_self_transitions", run.include_self_transitions),
    INT_KEY("k_genres", run.k_genres),
    INT_KEY("top_n_artists", run.top_n_artists),
    INT_KEY("min_streams_per_profile", run.min_streams_per_profile),
    INT_KEY("pairs_per_stratum_sample", run.pairs_per_stratum_sample),
    INT_KEY("reference_year", run.reference_year),
    INT_KEY("min_cell_streams", run.min_cell_streams),
    BOOL_KEY("zscore_within_rows", run.zscore_within_rows),
    BOOL_KEY("unifrac_normalized", run.unifrac_normalized),
    INTLIST_KEY("rarefaction_depths", run.rarefaction_depths),
    INT_KEY("rarefaction_reps", run.rarefaction_reps),
    INT_KEY("rarefaction_sample", run.rarefaction_sample),
    INT_KEY("synth.regions", synth.regions),
    INT_KEY("synth.genres", synth.genres),
    INT_KEY("synth.artists_per_genre", synth.artists_per_genre),
    INT_KEY("synth.listeners_per_region", synth.listeners_per_region),
    DOUBLE_KEY("synth.concentration", synth.concentration),
    DOUBLE_KEY("synth.individual_weight", synth.individual_weight),
    DOUBLE_KEY("synth.mover_fraction", synth.mover_fraction),
    DOUBLE_KEY("synth.past_mover_fraction", synth.past_mover_fraction),
    DOUBLE_KEY("synth.adoption", synth.adoption),
    DOUBLE_KEY("synth.holiday_travel_prob", synth.holiday_travel_prob),
    DOUBLE_KEY("synth.nonmover_holiday_travel_prob", synth.nonmover_holiday_travel_prob),
    DOUBLE_KEY("synth.streams_per_period_mean", synth.streams_per_period_mean),
    DOUBLE_KEY("synth.streams_per_holiday_mean", synth.streams_per_holiday_mean),
    DOUBLE_KEY("synth.session_mean_length", synth.session_mean_length),
    DOUBLE_KEY("synth.zipf_exponent", synth.zipf_exponent),
    DOUBLE_KEY("synth.tag_coverage", synth.tag_coverage),
    DOUBLE_KEY("synth.adolescence_affinity", synth.adolescence_affinity),
    DOUBLE_KEY("synth.recency_decay", synth.recency_decay),
    INTLIST_KEY("synth.age_buckets", synth.age_buckets),
    BOOL_KEY("synth.disjoint_region_genres", synth.disjoint_region_genres),
    UINT64_KEY("synth.plant_seed", synth.plant_seed),
};

#undef INT_KEY
#undef UINT64_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY
#undef INTLIST_KEY
#undef PERIOD_KEY

}  // namespace

Config parse_config_text(std::string_view text) {
  Config c;
  bool saw_holiday = false;
  size_t line_no = 0;
  for (auto raw_line : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw_line;
    size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));

    if (key.starts_with("holiday.")) {
      if (!saw_holiday) {
        c.run.holidays.clear();  // explicit holidays replace the defaults
        saw_holiday = true;
      }
      std::pair<Day, Day> range;
      if (!parse_range(value, range)) {
        throw ConfigError("config line " + std::to_string(line_no) + ": bad date range for " + key);
      }
      c.run.holidays.push_back({key.substr(8), range.first, range.second});
      continue;
    }

    bool handled = false;
    for (const auto& entry : kConfigKeys) {
      if (key == entry.name) {
        if (!entry.set(c, value)) {
          throw ConfigError("config line " + std::to_string(line_no) + ": bad value for " + key);
        }
        handled = true;
        break;
      }
    }
    if (!handled) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key \"" + key + "\"");
    }
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string dump_config(const Config& c) {
  std::string out;
  for (const auto& entry : kConfigKeys) {
    out += entry.name;
    out += " = ";
    out += entry.get(c);
    out.push_back('\n');
    // Holidays sit between the period block and the remaining run keys.
    if (std::string_view(entry.name) == "period.p3") {
      for (const auto& h : c.run.holidays) {
        out += "holiday." + h.id + " = " + format_date(h.start) + ".." + format_date(h.end) + "\n";
      }
    }
  }
  return out;
}

std::vector<std::string> validate_config(const Config& c) {
  std::vector<std::string> v;
  const RunConfig& r = c.run;
  if (r.k_genres <= 0) v.push_back("K must be positive");
  if (r.top_n_artists <= 0) v.push_back("top_n_artists must be positive");
  if (r.min_streams_per_profile <= 0) v.push_back("min_streams_per_profile must be positive");
  if (r.pairs_per_stratum_sample <= 0) v.push_back("pairs_per_stratum_sample must be positive");
  if (r.session_gap_minutes <= 0) v.push_back("session_gap_minutes must be positive");
  if (r.sampled_days_per_period <= 0) v.push_back("sampled_days_per_period must be positive");
  if (r.min_cell_streams <= 0) v.push_back("min_cell_streams must be positive");
  if (r.rarefaction_reps <= 0) v.push_back("rarefaction_reps must be positive");
  if (r.rarefaction_sample <= 0) v.push_back("rarefaction_sample must be positive");
  for (int d : r.rarefaction_depths) {
    if (d <= 0) {
      v.push_back("rarefaction_depths must be positive");
      break;
    }
  }
  for (int i = 0; i < kPeriodCount; ++i) {
    auto [start, end] = r.period_ranges[i];
    std::string name = period_name(static_cast<PeriodId>(i));
    if (start > end) v.push_back("period " + name + " has start after end");
    else if (end - start + 1 < r.sampled_days_per_period) {
      v.push_back("period " + name + " is shorter than sampled_days_per_period");
    }
  }
  for (const auto& h : c.run.holidays) {
    if (h.end - h.start + 1 != 5) {
      v.push_back("holiday window \"" + h.id + "\" must span exactly 5 days, got " +
                  std::to_string(h.end - h.start + 1));
    }
  }
  for (size_t i = 0; i < c.run.holidays.size(); ++i) {
    for (size_t j = i + 1; j < c.run.holidays.size(); ++j) {
      const auto& a = c.run.holidays[i];
      const auto& b = c.run.holidays[j];
      if (a.start <= b.end && b.start <= a.end) {
        v.push_back("holiday windows \"" + a.id + "\" and \"" + b.id + "\" overlap");
      }
    }
  }

  const SynthConfig& s = c.synth;
  auto rate = [&](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) v.push_back(std::string("synth.") + name + " must be in [0,1]");
  };
  rate(s.individual_weight, "individual_weight");
  rate(s.mover_fraction, "mover_fraction");
  rate(s.past_mover_fraction, "past_mover_fraction");
  rate(s.adoption, "adoption");
  rate(s.holiday_travel_prob, "holiday_travel_prob");
  rate(s.nonmover_holiday_travel_prob, "nonmover_holiday_travel_prob");
  rate(s.tag_coverage, "tag_coverage");
  rate(s.adolescence_affinity, "adolescence_affinity");
  if (s.mover_fraction + s.past_mover_fraction > 1.0) {
    v.push_back("synth.mover_fraction + synth.past_mover_fraction must be <= 1");
  }
  if (s.regions <= 0) v.push_back("synth.regions must be positive");
  if (s.regions > 51) v.push_back("synth.regions must be <= 51 (US state codes)");
  if (s.genres <= 0) v.push_back("synth.genres must be positive");
  if (s.artists_per_genre <= 0) v.push_back("synth.artists_per_genre must be positive");
  if (s.listeners_per_region <= 0) v.push_back("synth.listeners_per_region must be positive");
  if (!(s.concentration > 0.0)) v.push_back("synth.concentration must be positive");
  if (!(s.streams_per_period_mean > 0.0)) v.push_back("synth.streams_per_period_mean must be positive");
  if (!(s.streams_per_holiday_mean >= 0.0)) v.push_back("synth.streams_per_holiday_mean must be non-negative");
  if (!(s.session_mean_length >= 1.0)) v.push_back("synth.session_mean_length must be >= 1");
  if (!(s.recency_decay > 0.0 && s.recency_decay <= 1.0)) v.push_back("synth.recency_decay must be in (0,1]");
  if (s.age_buckets.empty()) v.push_back("synth.age_buckets must be non-empty");
  for (int b : s.age_buckets) {
    if (b % 5 != 0) {
      v.push_back("synth.age_buckets entries must be divisible by 5");
      break;
    }
  }
  if (s.disjoint_region_genres && s.genres < s.regions) {
    v.push_back("synth.disjoint_region_genres requires genres >= regions");
  }
  return v;
}

SamplePeriod make_sample_period(PeriodId id, std::pair<Day, Day> range, int days, uint64_t seed) {
  SamplePeriod p;
  p.id = id;
  p.start = range.first;
  p.end = range.second;
  int64_t span = static_cast<int64_t>(range.second) - range.first + 1;
  Rng rng = Rng::substream(seed, std::string("sampled_days.") + period_name(id));
  auto idx = rng.sample_indices(span, std::min<int64_t>(days, span));
  std::sort(idx.begin(), idx.end());
  p.sampled_days.reserve(idx.size());
  for (int64_t i : idx) p.sampled_days.push_back(range.first + static_cast<Day>(i));
  return p;
}

std::array<SamplePeriod, kPeriodCount> make_sample_periods(const RunConfig& cfg) {
  return {make_sample_period(PeriodId::P1, cfg.period_ranges[0], cfg.sampled_days_per_period, cfg.seed),
          make_sample_period(PeriodId::P2, cfg.period_ranges[1], cfg.sampled_days_per_period, cfg.seed),
          make_sample_period(PeriodId::P3, cfg.period_ranges[2], cfg.sampled_days_per_period, cfg.seed)};
}

}  // namespace taste
