#include <doctest.h>

#include <filesystem>
#include <set>

#include "censuslab/ingest.hpp"
#include "censuslab/rng.hpp"
#include "censuslab/tabulate.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace censuslab;
using censuslab::testing::small_tract_fixture;

namespace {

Dataset small_canonical(std::uint64_t seed) {
  SynthConfig sc;
  sc.tracts_per_county = 2;
  sc.blocks_per_tract = 2;
  sc.block_pop_min = 15;
  sc.block_pop_max = 40;
  sc.seed = seed;
  return generate_synthetic(sc);
}

const TableInstance& table_of(const std::vector<TabulatedUnit>& tus, const GeoId& unit,
                              std::string_view workload) {
  for (const TabulatedUnit& tu : tus) {
    if (tu.unit == unit) return tu.table(workload);
  }
  throw TablesError("unit not tabulated");
}

std::int64_t cell_count(const std::vector<TabulatedUnit>& tus,
                        const std::vector<Workload>& workloads, const GeoId& unit,
                        std::string_view workload, std::string_view label) {
  const TableInstance& t = table_of(tus, unit, workload);
  for (const Workload& w : workloads) {
    if (w.name == workload) return t.counts[w.cell_index(label)];
  }
  throw TablesError("workload not found");
}

}  // namespace

TEST_CASE("predicates accept sorted merged ranges") {
  AttrPredicate p{attr_idx::kAge, {{10, 14}, {5, 9}, {30, 40}}};
  p.normalize();
  CHECK(p.ranges == std::vector<std::pair<AttrValue, AttrValue>>{{5, 14}, {30, 40}});
  CHECK(p.accepts(5));
  CHECK(p.accepts(14));
  CHECK(!p.accepts(15));
  CHECK(p.accepts(35));
  CHECK(!p.accepts(41));
  CHECK(p.accepted_count() == 21);

  AttrPredicate empty{attr_idx::kAge, {}};
  CHECK_THROWS_AS(empty.normalize(), ConfigError);
  AttrPredicate backwards{attr_idx::kAge, {{9, 5}}};
  CHECK_THROWS_AS(backwards.normalize(), ConfigError);

  CellPredicate cp;
  cp.attrs.push_back({attr_idx::kAge, {{10, 40}}});
  cp.attrs.push_back({attr_idx::kAge, {{35, 90}}});
  cp.normalize();
  REQUIRE(cp.attrs.size() == 1);
  CHECK(cp.attrs[0].ranges == std::vector<std::pair<AttrValue, AttrValue>>{{35, 40}});

  CellPredicate impossible;
  impossible.attrs.push_back({attr_idx::kAge, {{10, 20}}});
  impossible.attrs.push_back({attr_idx::kAge, {{30, 40}}});
  CHECK_THROWS_AS(impossible.normalize(), ConfigError);
}

TEST_CASE("built-in workload shells are well formed") {
  for (GeoLevel level : {GeoLevel::block, GeoLevel::tract}) {
    const auto workloads = builtin_workloads(level);
    std::set<std::string> names;
    for (const Workload& w : workloads) {
      CHECK(names.insert(w.name).second);
      CHECK(w.level == level);
      REQUIRE(!w.cells.empty());
      CHECK(w.cells[0].label == "total");
      std::set<std::string> labels;
      for (const WorkloadCell& c : w.cells) CHECK(labels.insert(c.label).second);
    }
  }
  CHECK(builtin_workloads(GeoLevel::block).size() == 15);   // P1..P12I
  CHECK(builtin_workloads(GeoLevel::tract).size() == 16);   // PCT12..PCT12O
  CHECK_THROWS_AS((void)builtin_workloads(GeoLevel::county), ConfigError);

  const auto block = builtin_workloads(GeoLevel::block);
  const Workload& p12 = block[5];
  CHECK(p12.name == "P12");
  CHECK(p12.cells.size() == 1 + 2 * (1 + p12_age_buckets().size()));
  CHECK(p12.find_cell("male:22-24").has_value());
  CHECK(!p12.find_cell("male:23").has_value());
  CHECK_THROWS_AS((void)p12.cell_index("nope"), SchemaError);
}

TEST_CASE("tabulation equals the scan oracle everywhere") {
  Dataset d = small_canonical(3);
  for (GeoLevel level : {GeoLevel::block, GeoLevel::tract}) {
    const auto workloads = builtin_workloads(level);
    const auto tus = tabulate(d, workloads, 2);
    REQUIRE(tus.size() == d.units(level).size());
    for (const TabulatedUnit& tu : tus) {
      REQUIRE(tu.tables.size() == workloads.size());
      for (std::size_t w = 0; w < workloads.size(); ++w) {
        const TableInstance& t = tu.tables[w];
        CHECK(t.workload == workloads[w].name);
        REQUIRE(t.counts.size() == workloads[w].cells.size());
        for (std::size_t c = 0; c < t.counts.size(); ++c) {
          CHECK(t.counts[c] ==
                oracle::count_rows(d, tu.unit, workloads[w].cells[c].pred));
        }
      }
    }
  }
}

TEST_CASE("tabulation is independent of the worker count") {
  Dataset d = small_canonical(4);
  const auto workloads = builtin_workloads(GeoLevel::block);
  const auto serial = tabulate(d, workloads, 1);
  const auto parallel = tabulate(d, workloads, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].unit == parallel[i].unit);
    for (std::size_t t = 0; t < serial[i].tables.size(); ++t) {
      CHECK(serial[i].tables[t].counts == parallel[i].tables[t].counts);
    }
  }
}

TEST_CASE("hand-checkable tract comes out exactly") {
  Dataset d = small_tract_fixture();
  const auto workloads = builtin_workloads(GeoLevel::tract);
  const auto tus = tabulate(d, workloads, 1);
  REQUIRE(tus.size() == 1);
  const GeoId tract = d.units(GeoLevel::tract)[0];

  CHECK(cell_count(tus, workloads, tract, "PCT12", "total") == 98);
  CHECK(cell_count(tus, workloads, tract, "PCT12", "male") == 98);
  CHECK(cell_count(tus, workloads, tract, "PCT12", "female") == 0);
  CHECK(cell_count(tus, workloads, tract, "PCT12A", "male:0") == 9);
  CHECK(cell_count(tus, workloads, tract, "PCT12A", "male:5") == 17);
  CHECK(cell_count(tus, workloads, tract, "PCT12I", "male:0") == 7);
  CHECK(cell_count(tus, workloads, tract, "PCT12B", "male:2") == 3);
  CHECK(cell_count(tus, workloads, tract, "PCT12G", "male") == 21);
  CHECK(cell_count(tus, workloads, tract, "PCT12O", "male") == 14);
  CHECK(cell_count(tus, workloads, tract, "PCT12G", "male:30") == 15);
  CHECK(cell_count(tus, workloads, tract, "PCT12O", "male:30") == 10);
  CHECK(cell_count(tus, workloads, tract, "PCT12H", "male:30") == 5);
  CHECK(cell_count(tus, workloads, tract, "PCT12H", "male") == 11);
  CHECK(cell_count(tus, workloads, tract, "PCT12F", "male:3") == 1);
  CHECK(cell_count(tus, workloads, tract, "PCT12N", "male:3") == 0);

  const auto block_workloads = builtin_workloads(GeoLevel::block);
  const auto block_tus = tabulate(d, block_workloads, 1);
  const GeoId block = d.units(GeoLevel::block)[0];
  CHECK(cell_count(block_tus, block_workloads, block, "P1", "total") == 98);
  CHECK(cell_count(block_tus, block_workloads, block, "P6", "white_alone") == 70);
  CHECK(cell_count(block_tus, block_workloads, block, "P6", "two_or_more") == 21);
  CHECK(cell_count(block_tus, block_workloads, block, "P9", "hispanic") == 11);
  CHECK(cell_count(block_tus, block_workloads, block, "P11", "total") == 15);
  CHECK(cell_count(block_tus, block_workloads, block, "P11", "hispanic") == 5);
  CHECK(cell_count(block_tus, block_workloads, block, "P12", "male:30-34") == 15);
  CHECK(cell_count(block_tus, block_workloads, block, "P12A", "male:0-4") == 53);
}

TEST_CASE("hispanic iteration equals the race iterations' difference") {
  Dataset d = small_canonical(7);
  for (GeoLevel level : {GeoLevel::block, GeoLevel::tract}) {
    const auto workloads = builtin_workloads(level);
    const std::string base = level == GeoLevel::block ? "P12" : "PCT12";
    const auto tus = tabulate(d, workloads, 2);
    for (const TabulatedUnit& tu : tus) {
      const TableInstance& h = tu.table(base + "H");
      std::vector<std::int64_t> sum(h.counts.size(), 0);
      for (char letter = 'A'; letter <= 'G'; ++letter) {
        const auto& t = tu.table(base + letter);
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += t.counts[c];
      }
      const char last = level == GeoLevel::block ? 'I' : 'O';
      for (char letter = 'I'; letter <= last; ++letter) {
        const auto& t = tu.table(base + letter);
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] -= t.counts[c];
      }
      CHECK(sum == h.counts);
    }
  }
}

TEST_CASE("consistency passes on honest tables and flags tampering") {
  Dataset d = small_canonical(8);
  for (GeoLevel level : {GeoLevel::block, GeoLevel::tract}) {
    const auto workloads = builtin_workloads(level);
    auto tus = tabulate(d, workloads, 2);
    for (const TabulatedUnit& tu : tus) {
      CHECK(check_consistency(tu, workloads).empty());
    }

    Rng rng(static_cast<std::uint64_t>(level) + 100);
    for (int trial = 0; trial < 30; ++trial) {
      TabulatedUnit tu = tus[rng.uniform_below(tus.size())];
      const std::size_t t = rng.uniform_below(tu.tables.size());
      const std::size_t c = rng.uniform_below(tu.tables[t].counts.size());
      const std::int64_t k = 1 + static_cast<std::int64_t>(rng.uniform_below(5));
      tu.tables[t].counts[c] += rng.uniform_below(2) ? k : -k;
      CHECK(!check_consistency(tu, workloads).empty());
    }
  }
}

TEST_CASE("violation kinds are reported precisely") {
  Dataset d = small_tract_fixture();
  const auto workloads = builtin_workloads(GeoLevel::block);
  auto tus = tabulate(d, workloads, 1);
  REQUIRE(tus.size() == 1);

  auto kinds_after = [&](auto mutate) {
    TabulatedUnit tu = tus[0];
    mutate(tu);
    std::set<ViolationKind> kinds;
    for (const Violation& v : check_consistency(tu, workloads)) kinds.insert(v.kind);
    return kinds;
  };

  auto cell_ref = [&](TabulatedUnit& tu, std::string_view workload, std::string_view label)
      -> std::int64_t& {
    for (const Workload& w : workloads) {
      if (w.name != workload) continue;
      for (TableInstance& t : tu.tables) {
        if (t.workload == workload) return t.counts[w.cell_index(label)];
      }
    }
    throw TablesError("cell not found");
  };

  CHECK(kinds_after([&](TabulatedUnit& tu) {
          cell_ref(tu, "P12", "male:20") = -1;
        }).count(ViolationKind::negative_count) == 1);
  CHECK(kinds_after([&](TabulatedUnit& tu) {
          cell_ref(tu, "P12", "male") += 3;
        }).count(ViolationKind::internal_sum) == 1);
  CHECK(kinds_after([&](TabulatedUnit& tu) {
          // Shift a race iteration without touching its base table.
          cell_ref(tu, "P12A", "male:0-4") -= 1;
          cell_ref(tu, "P12A", "male") -= 1;
          cell_ref(tu, "P12A", "total") -= 1;
        }).count(ViolationKind::race_sum) == 1);
  CHECK(kinds_after([&](TabulatedUnit& tu) {
          cell_ref(tu, "P12H", "male:30-34") -= 1;
          cell_ref(tu, "P12H", "male") -= 1;
          cell_ref(tu, "P12H", "total") -= 1;
        }).count(ViolationKind::h_redundancy) == 1);
  CHECK(kinds_after([&](TabulatedUnit& tu) {
          // Not-hispanic two-or-more exceeding the group total at age 30-34.
          cell_ref(tu, "P12O", "male:30-34") = 16;
        }).count(ViolationKind::eth_pair) == 1);
  CHECK(kinds_after([&](TabulatedUnit& tu) {
          cell_ref(tu, "P1", "total") += 2;
        }).count(ViolationKind::total_mismatch) == 1);
}

TEST_CASE("declarative workload files round trip") {
  const AttributeSchema schema = canonical_schema();
  const auto block = builtin_workloads(GeoLevel::block);
  auto path = std::filesystem::temp_directory_path() / "censuslab_workloads.json";
  save_workloads(path.string(), block, schema);
  const auto back = load_workloads(path.string(), schema);
  REQUIRE(back.size() == block.size());
  for (std::size_t i = 0; i < block.size(); ++i) {
    CHECK(back[i].name == block[i].name);
    CHECK(back[i].level == block[i].level);
    REQUIRE(back[i].cells.size() == block[i].cells.size());
    for (std::size_t c = 0; c < block[i].cells.size(); ++c) {
      CHECK(back[i].cells[c].label == block[i].cells[c].label);
      CHECK(back[i].cells[c].pred == block[i].cells[c].pred);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("single queries respect their scope") {
  Dataset d = small_canonical(11);
  CountingQuery q;
  q.scope = d.units(GeoLevel::tract)[1];
  q.pred.attrs.push_back({attr_idx::kSex, {{0, 0}}});
  q.pred.normalize();
  CHECK(evaluate_query(d, q) == oracle::count_rows(d, q.scope, q.pred));

  q.scope = GeoId{GeoLevel::nation, {}};
  CHECK(evaluate_query(d, q) == oracle::count_rows(d, q.scope, q.pred));
}
