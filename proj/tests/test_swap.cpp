#include <doctest.h>

#include <map>
#include <set>

#include "censuslab/ingest.hpp"
#include "censuslab/swap.hpp"
#include "censuslab/tabulate.hpp"
#include "test_support.hpp"

using namespace censuslab;

namespace {

SynthConfig mid_config(std::uint64_t seed) {
  SynthConfig sc;
  sc.n_states = 1;
  sc.counties_per_state = 1;
  sc.tracts_per_county = 3;
  sc.blocks_per_tract = 4;
  sc.block_pop_min = 30;
  sc.block_pop_max = 80;
  sc.seed = seed;
  return sc;
}

}  // namespace

TEST_CASE("at-risk records are the block-level key uniques") {
  Dataset d = generate_synthetic(mid_config(5));
  std::vector<std::string> keys{"sex", "age", "race", "hispanic"};
  std::vector<std::size_t> risk = identify_at_risk(d, keys);
  CHECK(std::is_sorted(risk.begin(), risk.end()));
  std::set<std::size_t> risk_set(risk.begin(), risk.end());

  Projection proj = Projection::plain(d.schema(), {"sex", "age", "hispanic", "race"});
  for (const GeoId& block : d.units(GeoLevel::block)) {
    Histogram h = project_unit(d, proj, block);
    for (std::size_t r : d.rows_in(block)) {
      Prototype p{{static_cast<std::uint16_t>(attr_idx::kSex),
                   static_cast<std::uint16_t>(attr_idx::kAge),
                   static_cast<std::uint16_t>(attr_idx::kHispanic),
                   static_cast<std::uint16_t>(attr_idx::kRace)},
                  {ProtoValue::point(d.value(r, attr_idx::kSex)),
                   ProtoValue::point(d.value(r, attr_idx::kAge)),
                   ProtoValue::point(d.value(r, attr_idx::kHispanic)),
                   ProtoValue::point(d.value(r, attr_idx::kRace))}};
      const bool unique = h.count_of(p) == 1;
      CHECK(unique == (risk_set.count(r) > 0));
    }
  }
}

TEST_CASE("swapping trades geography and nothing else") {
  Dataset d = generate_synthetic(mid_config(6));
  SwapConfig cfg;
  cfg.base_rate = 1.0;
  cfg.seed = 17;
  auto [swapped, report] = apply_swap(d, cfg);

  REQUIRE(swapped.n_records() == d.n_records());
  CHECK(report.n_pairs > 0);
  CHECK(report.n_selected <= report.n_at_risk);
  CHECK(report.n_pairs + report.n_no_partner == report.n_selected);

  std::set<std::size_t> touched;
  for (const auto& [a, b] : report.pairs) {
    CHECK(touched.insert(a).second);  // each record swaps at most once
    CHECK(touched.insert(b).second);
    const GeoId block_a = d.geo_of(a, GeoLevel::block);
    const GeoId block_b = d.geo_of(b, GeoLevel::block);
    CHECK(block_a != block_b);
    CHECK(swapped.geo_of(a, GeoLevel::block) == block_b);
    CHECK(swapped.geo_of(b, GeoLevel::block) == block_a);
  }
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    for (std::size_t a = 4; a < d.n_attrs(); ++a) {
      CHECK(swapped.value(r, a) == d.value(r, a));
    }
    if (!touched.count(r)) {
      CHECK(swapped.geo_of(r, GeoLevel::block) == d.geo_of(r, GeoLevel::block));
    }
  }

  std::size_t moved_total = 0;
  for (const auto& [block, n] : report.records_moved_per_block) moved_total += n;
  CHECK(moved_total == 2 * report.n_pairs);
}

TEST_CASE("swap partners agree on the match attributes") {
  Dataset d = generate_synthetic(mid_config(7));
  SwapConfig cfg;
  cfg.base_rate = 1.0;
  cfg.match_attrs = {"sex", "age_group"};
  cfg.seed = 3;
  auto [swapped, report] = apply_swap(d, cfg);
  REQUIRE(report.n_pairs > 0);
  for (const auto& [a, b] : report.pairs) {
    CHECK(d.value(a, attr_idx::kSex) == d.value(b, attr_idx::kSex));
    const AttrValue age_a = d.value(a, attr_idx::kAge);
    const AttrValue age_b = d.value(b, attr_idx::kAge);
    bool same_band = false;
    for (const AgeBucket& bucket : p12_age_buckets()) {
      const bool in_a = age_a >= static_cast<AttrValue>(bucket.lo) &&
                        age_a <= static_cast<AttrValue>(bucket.hi);
      const bool in_b = age_b >= static_cast<AttrValue>(bucket.lo) &&
                        age_b <= static_cast<AttrValue>(bucket.hi);
      if (in_a && in_b) same_band = true;
    }
    CHECK(same_band);
  }
}

TEST_CASE("swap preserves populations and the national mix") {
  Dataset d = generate_synthetic(mid_config(8));
  SwapConfig cfg;
  cfg.base_rate = 1.0;
  cfg.seed = 29;
  auto [swapped, report] = apply_swap(d, cfg);
  REQUIRE(report.n_pairs > 0);

  // One-for-one exchange keeps every block population fixed.
  REQUIRE(swapped.units(GeoLevel::block) == d.units(GeoLevel::block));
  for (const GeoId& block : d.units(GeoLevel::block)) {
    CHECK(swapped.rows_in(block).size() == d.rows_in(block).size());
  }

  // Geography-only exchange keeps the national demographic histogram fixed.
  Projection demo = Projection::plain(d.schema(), {"hhgq", "sex", "age", "hispanic", "race"});
  CHECK(project(d, demo, GeoLevel::nation) == project(swapped, demo, GeoLevel::nation));

  // Block tables, by contrast, must move where records moved.
  auto block_workloads = builtin_workloads(GeoLevel::block);
  auto block_before = tabulate(d, block_workloads, 1);
  auto block_after = tabulate(swapped, block_workloads, 1);
  bool any_changed = false;
  for (std::size_t i = 0; i < block_before.size(); ++i) {
    for (std::size_t t = 0; t < block_before[i].tables.size(); ++t) {
      if (block_before[i].tables[t].counts != block_after[i].tables[t].counts) {
        any_changed = true;
      }
    }
  }
  CHECK(any_changed);
}

TEST_CASE("swap rate scales down with block size") {
  SynthConfig sc;
  sc.tracts_per_county = 2;
  sc.blocks_per_tract = 2;
  sc.block_populations = {20, 400, 20, 400};
  sc.seed = 31;
  Dataset d = generate_synthetic(sc);

  SwapConfig cfg;
  cfg.base_rate = 4.0;
  cfg.size_exponent = 1.0;  // selection probability 4/pop
  cfg.seed = 51;
  auto [swapped, report] = apply_swap(d, cfg);

  std::map<GeoId, std::size_t> at_risk_per_block;
  for (std::size_t r : identify_at_risk(d, cfg.key_attrs)) {
    ++at_risk_per_block[d.geo_of(r, GeoLevel::block)];
  }
  std::size_t small_risk = 0, large_risk = 0, small_moved = 0, large_moved = 0;
  for (const GeoId& block : d.units(GeoLevel::block)) {
    const bool small = d.rows_in(block).size() < 100;
    (small ? small_risk : large_risk) += at_risk_per_block[block];
    auto it = report.records_moved_per_block.find(block);
    const std::size_t moved = it == report.records_moved_per_block.end() ? 0 : it->second;
    (small ? small_moved : large_moved) += moved;
  }
  REQUIRE(small_risk > 0);
  REQUIRE(large_risk > 0);
  // Small blocks select at probability ~0.2, large ones at ~0.01.
  CHECK(static_cast<double>(small_moved) / static_cast<double>(small_risk) >
        static_cast<double>(large_moved) / static_cast<double>(large_risk));
}

TEST_CASE("swap is deterministic per seed") {
  Dataset d1 = generate_synthetic(mid_config(9));
  Dataset d2 = generate_synthetic(mid_config(9));
  SwapConfig cfg;
  cfg.base_rate = 0.7;
  cfg.seed = 99;
  auto [a, ra] = apply_swap(d1, cfg);
  auto [b, rb] = apply_swap(d2, cfg);
  CHECK(ra.pairs == rb.pairs);
  cfg.seed = 100;
  auto [c, rc] = apply_swap(d2, cfg);
  CHECK(ra.pairs != rc.pairs);
}

TEST_CASE("zero rate swaps nothing") {
  Dataset d = generate_synthetic(mid_config(10));
  SwapConfig cfg;
  cfg.base_rate = 0.0;
  auto [swapped, report] = apply_swap(d, cfg);
  CHECK(report.n_selected == 0);
  CHECK(report.n_pairs == 0);
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    CHECK(swapped.geo_of(r, GeoLevel::block) == d.geo_of(r, GeoLevel::block));
  }
}

TEST_CASE("swap projection resolves age bands") {
  AttributeSchema schema = canonical_schema();
  Projection p = swap_projection(schema, {"sex", "age_group"});
  REQUIRE(p.attrs.size() == 2);
  CHECK(p.attrs[0].attr == attr_idx::kSex);
  CHECK(p.attrs[1].attr == attr_idx::kAge);
  CHECK(p.attrs[1].coarsen == AttrProjection::Coarsen::age_bucket);
  CHECK_THROWS_AS((void)swap_projection(schema, {"flavor"}), SchemaError);
}
