#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <set>

#include "censuslab/dataset.hpp"
#include "censuslab/parallel.hpp"
#include "censuslab/rng.hpp"
#include "censuslab/schema.hpp"
#include "censuslab/sha256.hpp"
#include "censuslab/util.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace censuslab;
using censuslab::testing::random_dataset;
using censuslab::testing::tiny_schema;

TEST_CASE("canonical schema layout") {
  AttributeSchema s = canonical_schema();
  CHECK(s.size() == 9);
  CHECK(s.index_of("state") == attr_idx::kState);
  CHECK(s.index_of("block") == attr_idx::kBlock);
  CHECK(s.index_of("sex") == attr_idx::kSex);
  CHECK(s.index_of("race") == attr_idx::kRace);
  CHECK(s.at(attr_idx::kAge).domain_size() == kMaxAge + 1);
  CHECK(s.at(attr_idx::kRace).domain_size() == kNumRaceCodes);
  CHECK(s.at(attr_idx::kSex).labels == std::vector<std::string>{"male", "female"});
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.at(i).geography);
  for (std::size_t i = 4; i < s.size(); ++i) CHECK(!s.at(i).geography);
  CHECK(s.geography_indices() == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(!s.find("nonsense").has_value());
  CHECK_THROWS_AS((void)s.index_of("nonsense"), SchemaError);
}

TEST_CASE("race codes collapse to the seven groups") {
  CHECK(race_group_of_code(1) == RaceGroup::white);
  CHECK(race_group_of_code(2) == RaceGroup::black);
  CHECK(race_group_of_code(6) == RaceGroup::other);
  for (int code = 7; code <= 63; ++code) {
    CHECK(race_group_of_code(code) == RaceGroup::two_or_more);
  }
  CHECK(race_group_name(RaceGroup::two_or_more) == "two_or_more");
  CHECK(race_group_by_name("white_alone") == RaceGroup::white);
  CHECK(!race_group_by_name("plaid").has_value());
}

TEST_CASE("age buckets partition the full range") {
  for (const auto* buckets : {&p12_age_buckets(), &pct12_age_buckets()}) {
    int expect = 0;
    for (const AgeBucket& b : *buckets) {
      CHECK(b.lo == expect);
      CHECK(b.hi >= b.lo);
      expect = b.hi + 1;
    }
    CHECK(expect == kMaxAge + 1);
  }
  CHECK(p12_age_buckets().size() == 23);
  CHECK(age_bucket_label({20, 20}) == "20");
  CHECK(age_bucket_label({22, 24}) == "22-24");
  CHECK(age_bucket_label({85, kMaxAge}) == "85+");
}

TEST_CASE("geo ids order and nest") {
  GeoId tract{GeoLevel::tract, {1, 2, 30, 0}};
  GeoId block_in{GeoLevel::block, {1, 2, 30, 4}};
  GeoId block_out{GeoLevel::block, {1, 2, 31, 4}};
  CHECK(tract.contains(block_in));
  CHECK(!tract.contains(block_out));
  CHECK(tract.contains(tract));
  CHECK(!block_in.contains(tract));
  CHECK(tract.label() == "1-2-30");
  CHECK(block_in.label() == "1-2-30-4");
  CHECK(geo_depth(GeoLevel::nation) == 0);
  CHECK(geo_depth(GeoLevel::block) == 4);
  CHECK(geo_level_by_name("tract") == GeoLevel::tract);
  GeoId nation{GeoLevel::nation, {}};
  CHECK(nation.contains(block_out));
}

TEST_CASE("prototype values compare as a total order") {
  ProtoValue p5 = ProtoValue::point(5);
  ProtoValue i57 = ProtoValue::interval(5, 7);
  ProtoValue u = ProtoValue::undetermined();
  CHECK(compare(p5, p5) == 0);
  CHECK(compare(p5, ProtoValue::point(6)) < 0);
  CHECK(p5 != i57);
  CHECK(compare(p5, i57) != 0);
  CHECK(compare(u, u) == 0);
  CHECK(compare(p5, u) != 0);
  CHECK_THROWS((void)ProtoValue::interval(5, 5));

  Prototype a{{1, 3}, {p5, i57}};
  Prototype b{{1, 3}, {p5, u}};
  CHECK(compare(a, a) == 0);
  CHECK(compare(a, b) != 0);
  CHECK(compare(a, b) == -compare(b, a));
  Prototype sub = a.subset(std::vector<std::uint16_t>{3});
  CHECK(sub.attrs == std::vector<std::uint16_t>{3});
  CHECK(sub.values == std::vector<ProtoValue>{i57});
  CHECK(a.value_for(3) != nullptr);
  CHECK(*a.value_for(3) == i57);
  CHECK(a.value_for(2) == nullptr);
}

TEST_CASE("histogram bookkeeping") {
  Histogram h({1, 2});
  Prototype p{{1, 2}, {ProtoValue::point(0), ProtoValue::point(1)}};
  Prototype q{{1, 2}, {ProtoValue::point(1), ProtoValue::point(1)}};
  h.add(p, 2);
  h.add(q);
  h.add(p);
  CHECK(h.total() == 4);
  CHECK(h.size() == 2);
  CHECK(h.count_of(p) == 3);
  CHECK(h.count_of(q) == 1);
  CHECK(h.count_of(Prototype{{1, 2}, {ProtoValue::point(9), ProtoValue::point(9)}}) == 0);

  auto items = h.sorted_items();
  REQUIRE(items.size() == 2);
  CHECK(compare(items[0].first, items[1].first) < 0);

  Prototype wrong{{1, 3}, {ProtoValue::point(0), ProtoValue::point(1)}};
  CHECK_THROWS_AS(h.add(wrong), SchemaError);

  Histogram other({1, 2});
  other.add(q, 5);
  h.merge(other);
  CHECK(h.count_of(q) == 6);
  CHECK(h.total() == 9);
}

TEST_CASE("multiset diff matches a map-based oracle") {
  AttributeSchema schema = tiny_schema();
  std::vector<std::uint16_t> attrs{4, 5};
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Rng rng(seed);
    auto fill = [&](Histogram& h, int n) {
      for (int i = 0; i < n; ++i) {
        Prototype p{attrs,
                    {ProtoValue::point(static_cast<AttrValue>(rng.uniform_below(3))),
                     ProtoValue::point(static_cast<AttrValue>(rng.uniform_below(2)))}};
        h.add(p);
      }
    };
    Histogram a(attrs), b(attrs);
    fill(a, 40);
    fill(b, 35);
    HistogramDiff diff = multiset_diff(a, b);
    oracle::DiffOracle want = oracle::diff_histograms(a, b);
    CHECK(diff.only_in_a.size() == want.only_a.size());
    CHECK(diff.only_in_b.size() == want.only_b.size());
    CHECK(diff.deltas.size() == want.deltas.size());
    for (const auto& [p, c] : diff.only_in_a) CHECK(want.only_a.at(p) == c);
    for (const auto& [p, c] : diff.only_in_b) CHECK(want.only_b.at(p) == c);
    for (const auto& [p, d] : diff.deltas) CHECK(want.deltas.at(p) == d);
  }
  Histogram a({1}), b({2});
  CHECK_THROWS_AS((void)multiset_diff(a, b), SchemaError);
}

TEST_CASE("identical histograms diff empty") {
  Histogram a({1}), b({1});
  Prototype p{{1}, {ProtoValue::point(0)}};
  a.add(p, 3);
  b.add(p, 3);
  CHECK(multiset_diff(a, b).empty());
  CHECK(a == b);
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    std::uint64_t x = a.next_u64();
    all_equal &= (x == b.next_u64());
    any_diff |= (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.uniform_below(13) < 13);
    double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK_THROWS_AS((void)r.uniform_below(0), SamplingError);
}

TEST_CASE("categorical sampling honours the weights") {
  Rng r(11);
  std::vector<double> w{0.0, 2.0, 0.0, 1.0};
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 6000; ++i) ++hits[r.categorical(w)];
  CHECK(hits[0] == 0);
  CHECK(hits[2] == 0);
  CHECK(hits[1] + hits[3] == 6000);
  // 2:1 odds; three sigma of binomial(6000, 2/3) is about 110.
  CHECK(std::abs(hits[1] - 4000) < 150);
  CHECK_THROWS_AS((void)r.categorical({0.0, 0.0}), SamplingError);
  CHECK_THROWS_AS((void)r.categorical({1.0, -0.5}), SamplingError);
}

TEST_CASE("seed derivation separates labels and indices") {
  std::set<std::uint64_t> seen;
  seen.insert(derive_seed(1, "swap"));
  seen.insert(derive_seed(1, "synth"));
  seen.insert(derive_seed(1, "swap", 1));
  seen.insert(derive_seed(1, "swap", 2));
  seen.insert(derive_seed(2, "swap"));
  CHECK(seen.size() == 5);
  CHECK(derive_seed(1, "swap", 3) == derive_seed(1, "swap", 3));
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // Multi-block input (> 64 bytes).
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");

  auto path = std::filesystem::temp_directory_path() / "censuslab_sha_test.txt";
  write_text_file(path.string(), "abc");
  CHECK(sha256_file_hex(path.string()) == sha256_hex("abc"));
  std::filesystem::remove(path);
}

TEST_CASE("text helpers") {
  CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split("", ',') == std::vector<std::string>{""});
  CHECK(trim("  x y\t") == "x y");
  CHECK(trim("") == "");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0 / 3.0) == format_double(1.0 / 3.0));
}

TEST_CASE("dataset validates and indexes rows") {
  AttributeSchema schema = tiny_schema();
  CHECK_THROWS_AS(Dataset::from_rows(schema, {{0, 0, 0, 0, 9, 0}}), DataError);
  CHECK_THROWS_AS(Dataset(schema, std::vector<AttrValue>{0, 0, 0}), DataError);

  Dataset d = random_dataset(schema, 200, 5);
  CHECK(d.n_records() == 200);
  for (GeoLevel level : {GeoLevel::state, GeoLevel::tract, GeoLevel::block}) {
    const auto& units = d.units(level);
    CHECK(std::is_sorted(units.begin(), units.end()));
    std::size_t covered = 0;
    for (const GeoId& u : units) {
      const auto& rows = d.rows_in(u);
      covered += rows.size();
      for (std::size_t r : rows) CHECK(d.geo_of(r, level) == u);
    }
    CHECK(covered == d.n_records());
  }
  GeoId unknown{GeoLevel::block, {9, 9, 9, 9}};
  CHECK(d.rows_in(unknown).empty());
}

TEST_CASE("projection of a unit matches a group-by oracle") {
  AttributeSchema schema = tiny_schema();
  Dataset d = random_dataset(schema, 300, 9);
  Projection proj = Projection::plain(schema, {"color", "shape"});
  for (const GeoId& unit : d.units(GeoLevel::tract)) {
    Histogram h = project_unit(d, proj, unit);
    auto want = oracle::group_by(d, unit, {4, 5});
    CHECK(h.size() == want.size());
    std::int64_t total = 0;
    for (const auto& [key, count] : want) {
      Prototype p{{4, 5},
                  {ProtoValue::point(key[0]), ProtoValue::point(key[1])}};
      CHECK(h.count_of(p) == count);
      total += count;
    }
    CHECK(h.total() == total);
  }
}

TEST_CASE("level-keyed projection carries geography") {
  AttributeSchema schema = tiny_schema();
  Dataset d = random_dataset(schema, 120, 13);
  Projection proj = Projection::plain(schema, {"color"});
  Histogram h = project(d, proj, GeoLevel::county);
  std::int64_t sum = 0;
  for (const auto& [p, c] : h) {
    CHECK(p.attrs.size() == 3);  // state, county, color
    sum += c;
  }
  CHECK(sum == 120);
  CHECK_THROWS_AS((void)project(d, Projection::plain(schema, {"state"}), GeoLevel::state),
                  SchemaError);
  CHECK_THROWS_AS((void)Projection::plain(schema, {"color", "color"}), SchemaError);
}

TEST_CASE("cached histograms are shared and consistent") {
  AttributeSchema schema = tiny_schema();
  Dataset d = random_dataset(schema, 150, 21);
  Projection proj = Projection::plain(schema, {"color", "shape"});
  auto h1 = d.histogram(proj, GeoLevel::block);
  auto h2 = d.histogram(proj, GeoLevel::block);
  CHECK(h1.get() == h2.get());
  CHECK(*h1 == project(d, proj, GeoLevel::block));
}

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<std::atomic<int>> hits(500);
  parallel_for(500, 4, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);
  parallel_for(0, 4, [&](std::size_t) { CHECK(false); });
  CHECK(effective_workers(3) == 3);
  CHECK(effective_workers(0) >= 1);

  CHECK_THROWS_AS(
      parallel_for(8, 2, [](std::size_t i) {
        if (i == 5) throw DataError("boom");
      }),
      DataError);
}
