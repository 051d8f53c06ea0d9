#include "cdsal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "text.hpp"

namespace cdsal {

namespace {

constexpr double kZ95 = 1.96;

bool record_less(const ScoreRecord& a, const ScoreRecord& b) {
  return std::tie(a.model, a.sequence, a.frame, a.metric) <
         std::tie(b.model, b.sequence, b.frame, b.metric);
}

bool in_scope(FrameType type, FrameScope scope) {
  switch (scope) {
    case FrameScope::kPooled: return true;
    case FrameScope::kIFrames: return type == FrameType::kI;
    case FrameScope::kPFrames: return type == FrameType::kP;
  }
  return false;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

std::string format_or_na(double v, bool present) {
  return present ? text::format_double(v) : "NA";
}

}  // namespace

void ScoreTable::add(ScoreRecord record) {
  if (record.status == ScoreStatus::kOk && !std::isfinite(record.value)) {
    throw Error(ErrorKind::kValidation, "score values must be finite");
  }
  auto key = std::make_tuple(record.model, record.sequence, record.frame, record.metric);
  if (!keys_.insert(std::move(key)).second) {
    throw Error(ErrorKind::kValidation,
                "duplicate score for " + record.model + "/" + record.sequence + "/frame " +
                    std::to_string(record.frame) + "/" +
                    std::string(metric_name(record.metric)));
  }
  records_.push_back(std::move(record));
}

void ScoreTable::sort() { std::sort(records_.begin(), records_.end(), record_less); }

const SummaryCell* Summary::find(std::string_view model, std::string_view sequence,
                                 MetricId metric) const {
  for (const SummaryCell& c : cells) {
    if (c.model == model && c.sequence == sequence && c.metric == metric) return &c;
  }
  return nullptr;
}

std::vector<std::string> Summary::models() const {
  std::set<std::string> ids;
  for (const SummaryCell& c : cells) ids.insert(c.model);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> Summary::sequences() const {
  std::set<std::string> ids;
  for (const SummaryCell& c : cells) {
    if (c.sequence != kAllSequences) ids.insert(c.sequence);
  }
  return {ids.begin(), ids.end()};
}

CellStats describe(std::vector<double> values) {
  CellStats s;
  s.n = values.size();
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean = s.sem = s.ci_low = s.ci_high = nan;
    return s;
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  s.ci_low = s.mean - kZ95 * s.sem;
  s.ci_high = s.mean + kZ95 * s.sem;
  // Rounding must not push the mean outside its own interval.
  s.ci_low = std::min(s.ci_low, s.mean);
  s.ci_high = std::max(s.ci_high, s.mean);
  return s;
}

Summary aggregate(const ScoreTable& table, FrameScope scope) {
  using Key = std::tuple<std::string, std::string, MetricId>;
  std::map<Key, std::vector<double>> groups;
  for (const ScoreRecord& r : table.records()) {
    if (!in_scope(r.frame_type, scope)) continue;
    auto& cell = groups[{r.model, r.sequence, r.metric}];
    auto& marginal = groups[{r.model, std::string(kAllSequences), r.metric}];
    if (r.status == ScoreStatus::kOk) {
      cell.push_back(r.value);
      marginal.push_back(r.value);
    }
  }
  Summary summary;
  for (auto& [key, values] : groups) {
    const CellStats s = describe(std::move(values));
    summary.cells.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), s.mean,
                             s.sem, s.ci_low, s.ci_high, s.n});
  }
  return summary;
}

std::vector<RankEntry> rank_sequences(const Summary& summary, MetricId metric,
                                      const std::set<std::string>& exclude) {
  const bool present = std::any_of(summary.cells.begin(), summary.cells.end(),
                                   [&](const SummaryCell& c) { return c.metric == metric; });
  if (!present) {
    throw Error(ErrorKind::kConfig,
                "metric '" + std::string(metric_name(metric)) + "' not in the summary");
  }
  std::map<std::string, std::vector<double>> means;
  for (const std::string& seq : summary.sequences()) means[seq];
  for (const SummaryCell& c : summary.cells) {
    if (c.metric != metric || c.sequence == kAllSequences || c.empty()) continue;
    if (exclude.count(c.model)) continue;
    means[c.sequence].push_back(c.mean);
  }
  std::vector<RankEntry> ranking;
  for (auto& [seq, values] : means) {
    RankEntry e{seq, std::numeric_limits<double>::quiet_NaN()};
    if (!values.empty()) e.score = describe(std::move(values)).mean;
    ranking.push_back(std::move(e));
  }
  std::stable_sort(ranking.begin(), ranking.end(), [](const RankEntry& a, const RankEntry& b) {
    const bool na = std::isnan(a.score);
    const bool nb = std::isnan(b.score);
    if (na != nb) return nb;
    if (na) return false;
    return a.score > b.score;
  });
  return ranking;
}

std::map<std::string, int> top_performers(const Summary& summary, MetricId metric,
                                          const std::set<std::string>& exclude) {
  std::map<std::string, int> counts;
  std::map<std::string, std::vector<const SummaryCell*>> by_sequence;
  for (const SummaryCell& c : summary.cells) {
    if (c.metric != metric || c.sequence == kAllSequences || c.empty()) continue;
    if (exclude.count(c.model)) continue;
    counts.emplace(c.model, 0);
    by_sequence[c.sequence].push_back(&c);
  }
  for (auto& [seq, cells] : by_sequence) {
    const SummaryCell* best = nullptr;
    for (const SummaryCell* c : cells) {
      if (best == nullptr || c->mean > best->mean ||
          (c->mean == best->mean && c->model < best->model)) {
        best = c;
      }
    }
    for (const SummaryCell* c : cells) {
      if (c->ci_low <= best->ci_high && best->ci_low <= c->ci_high) ++counts[c->model];
    }
  }
  return counts;
}

void write_scores(std::ostream& out, const ScoreTable& table) {
  std::vector<const ScoreRecord*> rows;
  rows.reserve(table.size());
  for (const ScoreRecord& r : table.records()) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(),
            [](const ScoreRecord* a, const ScoreRecord* b) { return record_less(*a, *b); });
  out << kScoresHeader << '\n';
  for (const ScoreRecord* r : rows) {
    out << r->model << ',' << r->sequence << ',' << r->frame << ',' << to_string(r->frame_type)
        << ',' << metric_name(r->metric) << ',';
    switch (r->status) {
      case ScoreStatus::kOk: out << text::format_double(r->value); break;
      case ScoreStatus::kUnscored: out << "NA"; break;
      case ScoreStatus::kDegenerate: out << "degenerate"; break;
      case ScoreStatus::kInfinite: out << "inf"; break;
    }
    out << '\n';
  }
}

void write_scores(const std::filesystem::path& path, const ScoreTable& table) {
  auto out = open_out(path);
  write_scores(out, table);
}

ScoreTable read_scores(std::istream& in, const std::string& source_name) {
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = text::strip_cr(line);
    if (row.empty()) continue;
    if (!header) {
      if (row != kScoresHeader) {
        throw ParseError(source_name, line_no, "header must be '" + std::string(kScoresHeader) + "'");
      }
      header = true;
      continue;
    }
    const auto f = text::split(row, ',');
    if (f.size() != 6) throw ParseError(source_name, line_no, "expected 6 fields");
    ScoreRecord r;
    r.model = std::string(f[0]);
    r.sequence = std::string(f[1]);
    const auto frame = text::parse_int(f[2]);
    if (!frame || *frame < 0) throw ParseError(source_name, line_no, "bad frame index");
    r.frame = static_cast<int>(*frame);
    if (f[3] == "I") {
      r.frame_type = FrameType::kI;
    } else if (f[3] == "P") {
      r.frame_type = FrameType::kP;
    } else {
      throw ParseError(source_name, line_no, "frame_type must be I or P");
    }
    const auto metric = parse_metric(f[4]);
    if (!metric) throw ParseError(source_name, line_no, "unknown metric '" + std::string(f[4]) + "'");
    r.metric = *metric;
    if (f[5] == "NA") {
      r.status = ScoreStatus::kUnscored;
    } else if (f[5] == "degenerate") {
      r.status = ScoreStatus::kDegenerate;
    } else if (f[5] == "inf") {
      r.status = ScoreStatus::kInfinite;
    } else {
      const auto v = text::parse_double(f[5]);
      if (!v) throw ParseError(source_name, line_no, "bad score value");
      r.value = *v;
    }
    try {
      table.add(std::move(r));
    } catch (const Error& e) {
      throw ParseError(source_name, line_no, e.what());
    }
  }
  if (!header) throw ParseError(source_name, 0, "missing header");
  return table;
}

ScoreTable load_scores(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_scores(in, path.string());
}

void write_summary(std::ostream& out, const Summary& summary) {
  out << kSummaryHeader << '\n';
  for (const SummaryCell& c : summary.cells) {
    const bool present = !c.empty();
    out << c.model << ',' << c.sequence << ',' << metric_name(c.metric) << ','
        << format_or_na(c.mean, present) << ',' << format_or_na(c.sem, present) << ','
        << format_or_na(c.ci_low, present) << ',' << format_or_na(c.ci_high, present) << ','
        << c.n << '\n';
  }
}

void write_summary(const std::filesystem::path& path, const Summary& summary) {
  auto out = open_out(path);
  write_summary(out, summary);
}

Summary read_summary(std::istream& in, const std::string& source_name) {
  Summary summary;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = text::strip_cr(line);
    if (row.empty()) continue;
    if (!header) {
      if (row != kSummaryHeader) {
        throw ParseError(source_name, line_no, "header must be '" + std::string(kSummaryHeader) + "'");
      }
      header = true;
      continue;
    }
    const auto f = text::split(row, ',');
    if (f.size() != 8) throw ParseError(source_name, line_no, "expected 8 fields");
    SummaryCell c;
    c.model = std::string(f[0]);
    c.sequence = std::string(f[1]);
    const auto metric = parse_metric(f[2]);
    if (!metric) throw ParseError(source_name, line_no, "unknown metric '" + std::string(f[2]) + "'");
    c.metric = *metric;
    const auto n = text::parse_int(f[7]);
    if (!n || *n < 0) throw ParseError(source_name, line_no, "bad count");
    c.n = static_cast<std::size_t>(*n);
    double* targets[] = {&c.mean, &c.sem, &c.ci_low, &c.ci_high};
    for (int k = 0; k < 4; ++k) {
      const std::string_view field = f[3 + k];
      if (c.n == 0) {
        if (field != "NA") throw ParseError(source_name, line_no, "empty cell must hold NA");
        *targets[k] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto v = text::parse_double(field);
      if (!v) throw ParseError(source_name, line_no, "bad number '" + std::string(field) + "'");
      *targets[k] = *v;
    }
    if (c.n > 0 && !(c.ci_low <= c.mean && c.mean <= c.ci_high)) {
      throw ParseError(source_name, line_no, "interval does not contain the mean");
    }
    summary.cells.push_back(std::move(c));
  }
  if (!header) throw ParseError(source_name, 0, "missing header");
  return summary;
}

Summary load_summary(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_summary(in, path.string());
}

void write_ranking(const std::filesystem::path& path,
                   const std::vector<std::pair<MetricId, std::vector<RankEntry>>>& rankings) {
  auto out = open_out(path);
  out << "metric,rank,sequence,score\n";
  for (const auto& [metric, entries] : rankings) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out << metric_name(metric) << ',' << i + 1 << ',' << entries[i].sequence << ','
          << format_or_na(entries[i].score, !std::isnan(entries[i].score)) << '\n';
    }
  }
}

void write_top_performers(
    const std::filesystem::path& path,
    const std::vector<std::pair<MetricId, std::map<std::string, int>>>& counts) {
  auto out = open_out(path);
  out << "metric,model,count\n";
  for (const auto& [metric, table] : counts) {
    for (const auto& [model, count] : table) {
      out << metric_name(metric) << ',' << model << ',' << count << '\n';
    }
  }
}

}  // namespace cdsal
