#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cdsal/stats.hpp"
#include "doctest.h"

using namespace cdsal;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

ScoreRecord rec(std::string model, std::string seq, int frame, double value,
                MetricId metric = MetricId::kAuc, FrameType type = FrameType::kP) {
  return {std::move(model), std::move(seq), frame, type, metric, ScoreStatus::kOk, value};
}

SummaryCell cell(std::string model, std::string seq, double mean, double half_width,
                 MetricId metric = MetricId::kAuc) {
  SummaryCell c;
  c.model = std::move(model);
  c.sequence = std::move(seq);
  c.metric = metric;
  c.mean = mean;
  c.sem = half_width / 1.96;
  c.ci_low = mean - half_width;
  c.ci_high = mean + half_width;
  c.n = 10;
  return c;
}

}  // namespace

TEST_CASE("describe") {
  const CellStats one = describe({0.7});
  CHECK(one.mean == 0.7);
  CHECK(one.sem == 0.0);
  CHECK(one.ci_low == 0.7);
  CHECK(one.ci_high == 0.7);

  const CellStats two = describe({0.0, 1.0});
  CHECK(two.mean == 0.5);
  // sd = sqrt(0.5), sem = sd / sqrt(2) = 0.5
  CHECK(two.sem == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(two.ci_low == doctest::Approx(0.5 - 1.96 * 0.5));
  CHECK(two.ci_high == doctest::Approx(0.5 + 1.96 * 0.5));

  CHECK(describe({}).n == 0);

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<double> v(1001);
  for (double& x : v) x = u(rng);
  const CellStats a = describe(v);
  std::shuffle(v.begin(), v.end(), rng);
  const CellStats b = describe(v);
  CHECK(a.mean == b.mean);
  CHECK(a.sem == b.sem);
}

TEST_CASE("score table") {
  ScoreTable t;
  t.add(rec("m", "s", 0, 0.5));
  CHECK(kind_of([&] { t.add(rec("m", "s", 0, 0.6)); }) == ErrorKind::kValidation);
  CHECK(kind_of([&] { t.add(rec("m", "s", 1, NAN)); }) == ErrorKind::kValidation);
  t.add(rec("m", "s", 0, 0.6, MetricId::kNss));
  CHECK(t.size() == 2);
}

TEST_CASE("aggregate") {
  ScoreTable t;
  t.add(rec("a", "s1", 0, 1.0, MetricId::kAuc, FrameType::kI));
  t.add(rec("a", "s1", 1, 0.2));
  t.add(rec("a", "s1", 2, 0.4));
  t.add(rec("a", "s2", 0, 0.9));
  ScoreRecord bad = rec("a", "s2", 1, 0.0);
  bad.status = ScoreStatus::kDegenerate;
  t.add(bad);
  ScoreRecord none = rec("a", "s2", 2, 0.0);
  none.status = ScoreStatus::kUnscored;
  t.add(none);

  const Summary pooled = aggregate(t);
  const SummaryCell* s1 = pooled.find("a", "s1", MetricId::kAuc);
  REQUIRE(s1);
  CHECK(s1->n == 3);
  CHECK(s1->mean == doctest::Approx(1.6 / 3));
  const SummaryCell* s2 = pooled.find("a", "s2", MetricId::kAuc);
  REQUIRE(s2);
  CHECK(s2->n == 1);
  CHECK(s2->mean == 0.9);
  const SummaryCell* all = pooled.find("a", kAllSequences, MetricId::kAuc);
  REQUIRE(all);
  CHECK(all->n == 4);
  CHECK(all->mean == doctest::Approx(2.5 / 4));
  CHECK(pooled.sequences() == std::vector<std::string>{"s1", "s2"});

  const Summary i = aggregate(t, FrameScope::kIFrames);
  const Summary p = aggregate(t, FrameScope::kPFrames);
  const double mi = i.find("a", "s1", MetricId::kAuc)->mean;
  const double mp = p.find("a", "s1", MetricId::kAuc)->mean;
  CHECK(mi == 1.0);
  CHECK(mp == doctest::Approx(0.3));
  CHECK(s1->mean >= std::min(mi, mp));
  CHECK(s1->mean <= std::max(mi, mp));
  CHECK(i.find("a", "s2", MetricId::kAuc) == nullptr);

  // Permutation invariance.
  std::vector<ScoreRecord> rows = t.records();
  std::mt19937 rng(3);
  std::shuffle(rows.begin(), rows.end(), rng);
  ScoreTable shuffled;
  for (auto& r : rows) shuffled.add(r);
  const Summary again = aggregate(shuffled);
  REQUIRE(again.cells.size() == pooled.cells.size());
  for (std::size_t k = 0; k < again.cells.size(); ++k) {
    CHECK(again.cells[k].mean == pooled.cells[k].mean);
    CHECK(again.cells[k].sem == pooled.cells[k].sem);
  }

  // A cell holding only non-ok records is present but empty.
  ScoreTable only_bad;
  only_bad.add(bad);
  const Summary e = aggregate(only_bad);
  REQUIRE(e.find("a", "s2", MetricId::kAuc));
  CHECK(e.find("a", "s2", MetricId::kAuc)->empty());
}

TEST_CASE("rank sequences") {
  Summary s;
  s.cells = {cell("gauss", "hard", 0.99, 0.01), cell("mvmag", "easy", 0.7, 0.01),
             cell("mvmag", "hard", 0.6, 0.01), cell("pmes", "easy", 0.8, 0.01),
             cell("pmes", "hard", 0.5, 0.01), cell("pmes", "tie", 0.65, 0.01),
             cell("mvmag", "tie", 0.65, 0.01), cell("pmes", "alpha", 0.65, 0.01)};
  const auto r = rank_sequences(s, MetricId::kAuc);
  REQUIRE(r.size() == 4);
  CHECK(r[0].sequence == "easy");
  CHECK(r[0].score == doctest::Approx(0.75));
  CHECK(r[1].sequence == "alpha");
  CHECK(r[2].sequence == "tie");
  CHECK(r[3].sequence == "hard");
  CHECK(r[3].score == doctest::Approx(0.55));

  const auto with_gauss = rank_sequences(s, MetricId::kAuc, {});
  const auto hard = std::find_if(with_gauss.begin(), with_gauss.end(), [](auto& e) { return e.sequence == "hard"; });
  CHECK(hard->score == doctest::Approx((0.99 + 0.6 + 0.5) / 3));
  const auto easy = std::find_if(with_gauss.begin(), with_gauss.end(), [](auto& e) { return e.sequence == "easy"; });
  CHECK(easy->score == doctest::Approx(0.75));

  CHECK(kind_of([&] { rank_sequences(s, MetricId::kPcc); }) == ErrorKind::kConfig);

  // One sequence dominating on every model ranks first under every metric.
  Summary dom;
  for (MetricId m : {MetricId::kAuc, MetricId::kNss, MetricId::kPcc}) {
    for (const char* model : {"mvmag", "pmes", "obdl"}) {
      dom.cells.push_back(cell(model, "top", 5.0, 0.1, m));
      dom.cells.push_back(cell(model, "mid", 1.0, 0.1, m));
      dom.cells.push_back(cell(model, "low", -1.0, 0.1, m));
    }
  }
  for (MetricId m : {MetricId::kAuc, MetricId::kNss, MetricId::kPcc}) {
    CHECK(rank_sequences(dom, m)[0].sequence == "top");
  }
}

TEST_CASE("top performers") {
  Summary s;
  s.cells = {cell("io", "s1", 0.99, 0.01), cell("a", "s1", 0.9, 0.01), cell("b", "s1", 0.5, 0.01),
             cell("a", "s2", 0.6, 0.05), cell("b", "s2", 0.62, 0.05), cell("c", "s2", 0.4, 0.01)};
  const auto counts = top_performers(s, MetricId::kAuc);
  CHECK(counts.count("io") == 0);
  CHECK(counts.at("a") == 2);
  CHECK(counts.at("b") == 1);
  CHECK(counts.at("c") == 0);

  // Identical streams count together; a constant shift changes nothing.
  Summary twins;
  twins.cells = {cell("x", "s", 0.7, 0.02), cell("y", "s", 0.7, 0.02), cell("z", "s", 0.2, 0.02)};
  auto t = top_performers(twins, MetricId::kAuc);
  CHECK(t.at("x") == 1);
  CHECK(t.at("y") == 1);
  CHECK(t.at("z") == 0);
  for (SummaryCell& c : twins.cells) {
    c.mean += 3.0;
    c.ci_low += 3.0;
    c.ci_high += 3.0;
  }
  CHECK(top_performers(twins, MetricId::kAuc) == t);
}

TEST_CASE("csv round trips") {
  ScoreTable t;
  t.add(rec("b", "s", 1, 0.1 + 0.2));
  t.add(rec("a", "s", 0, 1.0 / 3.0, MetricId::kNssPrime, FrameType::kI));
  ScoreRecord inf = rec("a", "s", 1, 0.0, MetricId::kKld);
  inf.status = ScoreStatus::kInfinite;
  t.add(inf);
  ScoreRecord na = rec("a", "s", 2, 0.0, MetricId::kKld);
  na.status = ScoreStatus::kUnscored;
  t.add(na);
  std::ostringstream out;
  write_scores(out, t);
  CHECK(out.str().rfind(std::string(kScoresHeader) + "\n", 0) == 0);
  std::istringstream in(out.str());
  const ScoreTable back = read_scores(in, "mem");
  std::ostringstream again;
  write_scores(again, back);
  CHECK(again.str() == out.str());
  REQUIRE(back.size() == 4);

  const Summary s = aggregate(t);
  std::ostringstream so;
  write_summary(so, s);
  std::istringstream si(so.str());
  const Summary sb = read_summary(si, "mem");
  REQUIRE(sb.cells.size() == s.cells.size());
  for (std::size_t k = 0; k < s.cells.size(); ++k) {
    CHECK(sb.cells[k].model == s.cells[k].model);
    CHECK(sb.cells[k].n == s.cells[k].n);
    if (!s.cells[k].empty()) CHECK(sb.cells[k].mean == s.cells[k].mean);
  }

  std::istringstream bad("model,sequence,frame\n");
  CHECK_THROWS_AS(read_scores(bad, "mem"), ParseError);
}
