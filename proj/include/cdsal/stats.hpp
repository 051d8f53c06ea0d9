#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cdsal/core.hpp"
#include "cdsal/metrics.hpp"

namespace cdsal {

struct ScoreRecord {
  std::string model;
  std::string sequence;
  int frame = 0;
  FrameType frame_type = FrameType::kP;
  MetricId metric = MetricId::kAuc;
  ScoreStatus status = ScoreStatus::kOk;
  double value = 0.0;  // meaningful only when status is kOk
};

class ScoreTable {
 public:
  // Throws kValidation on a repeated (model, sequence, frame, metric) key or a
  // non-finite ok value.
  void add(ScoreRecord record);
  const std::vector<ScoreRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  // Canonical order: model, sequence, frame, metric.
  void sort();

 private:
  std::vector<ScoreRecord> records_;
  std::set<std::tuple<std::string, std::string, int, MetricId>> keys_;
};

enum class FrameScope { kPooled, kIFrames, kPFrames };

// Sequence id of the per-model marginal rows.
inline constexpr std::string_view kAllSequences = "*";

struct SummaryCell {
  std::string model;
  std::string sequence;
  MetricId metric = MetricId::kAuc;
  double mean = 0.0;
  double sem = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;  // 0 marks an empty cell: no finite scores

  bool empty() const { return n == 0; }
};

struct Summary {
  std::vector<SummaryCell> cells;  // sorted by model, sequence, metric

  const SummaryCell* find(std::string_view model, std::string_view sequence,
                          MetricId metric) const;
  std::vector<std::string> models() const;
  std::vector<std::string> sequences() const;  // excludes the marginal id
};

struct CellStats {
  double mean = 0.0;
  double sem = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

// Mean, SEM (sample SD / sqrt n, 0 for n = 1) and the normal 95% interval.
// Exactly invariant to the order of `values`.
CellStats describe(std::vector<double> values);

// One cell per (model, sequence, metric) present in scope plus per-model
// marginals over all sequences. Only ok scores enter n.
Summary aggregate(const ScoreTable& table, FrameScope scope = FrameScope::kPooled);

struct RankEntry {
  std::string sequence;
  double score = 0.0;  // NaN when no included model scored the sequence
};

// Sequences by decreasing mean over included models; ties broken by
// ascending sequence id; unscored sequences last. Throws kConfig when no
// cell carries `metric`.
std::vector<RankEntry> rank_sequences(const Summary& summary, MetricId metric,
                                      const std::set<std::string>& exclude = {"io", "gauss"});

// Per sequence, every model whose 95% interval intersects that of the best
// mean (ties to the smaller id) is a top performer. Every eligible model
// appears in the result, possibly with count 0.
std::map<std::string, int> top_performers(const Summary& summary, MetricId metric,
                                          const std::set<std::string>& exclude = {"io"});

// --- CSV --------------------------------------------------------------------

inline constexpr std::string_view kScoresHeader = "model,sequence,frame,frame_type,metric,value";
inline constexpr std::string_view kSummaryHeader =
    "model,sequence,metric,mean,sem,ci_low,ci_high,n";

void write_scores(std::ostream& out, const ScoreTable& table);
void write_scores(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable read_scores(std::istream& in, const std::string& source_name);
ScoreTable load_scores(const std::filesystem::path& path);

void write_summary(std::ostream& out, const Summary& summary);
void write_summary(const std::filesystem::path& path, const Summary& summary);
Summary read_summary(std::istream& in, const std::string& source_name);
Summary load_summary(const std::filesystem::path& path);

void write_ranking(const std::filesystem::path& path,
                   const std::vector<std::pair<MetricId, std::vector<RankEntry>>>& rankings);
void write_top_performers(
    const std::filesystem::path& path,
    const std::vector<std::pair<MetricId, std::map<std::string, int>>>& counts);

}  // namespace cdsal
