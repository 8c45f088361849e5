#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "censuslab/ingest.hpp"
#include "censuslab/util.hpp"
#include "test_support.hpp"

using namespace censuslab;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

SynthConfig grid_config() {
  SynthConfig sc;
  sc.n_states = 2;
  sc.counties_per_state = 2;
  sc.tracts_per_county = 2;
  sc.blocks_per_tract = 3;
  sc.block_pop_min = 20;
  sc.block_pop_max = 40;
  sc.seed = 77;
  return sc;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic per seed") {
  SynthConfig sc = grid_config();
  Dataset a = generate_synthetic(sc);
  Dataset b = generate_synthetic(sc);
  REQUIRE(a.n_records() == b.n_records());
  for (std::size_t r = 0; r < a.n_records(); ++r) {
    const auto ra = a.record(r), rb = b.record(r);
    CHECK(std::vector<AttrValue>(ra.begin(), ra.end()) ==
          std::vector<AttrValue>(rb.begin(), rb.end()));
  }
  sc.seed = 78;
  Dataset c = generate_synthetic(sc);
  bool differs = c.n_records() != a.n_records();
  for (std::size_t r = 0; !differs && r < a.n_records(); ++r) {
    const auto ra = a.record(r), rc = c.record(r);
    differs = !std::equal(ra.begin(), ra.end(), rc.begin());
  }
  CHECK(differs);
}

TEST_CASE("synthetic geography forms the configured grid") {
  SynthConfig sc = grid_config();
  Dataset d = generate_synthetic(sc);
  CHECK(d.units(GeoLevel::state).size() == 2);
  CHECK(d.units(GeoLevel::county).size() == 4);
  CHECK(d.units(GeoLevel::tract).size() == 8);
  CHECK(d.units(GeoLevel::block).size() == 24);
  for (const GeoId& block : d.units(GeoLevel::block)) {
    const std::size_t pop = d.rows_in(block).size();
    CHECK(pop >= 20);
    CHECK(pop <= 40);
  }
}

TEST_CASE("explicit block populations override the range") {
  SynthConfig sc;
  sc.blocks_per_tract = 3;
  sc.block_populations = {5, 17, 33};
  sc.seed = 3;
  Dataset d = generate_synthetic(sc);
  const auto& blocks = d.units(GeoLevel::block);
  REQUIRE(blocks.size() == 3);
  CHECK(d.rows_in(blocks[0]).size() == 5);
  CHECK(d.rows_in(blocks[1]).size() == 17);
  CHECK(d.rows_in(blocks[2]).size() == 33);

  sc.block_populations = {1, 2};  // wrong length for the grid
  CHECK_THROWS_AS((void)generate_synthetic(sc), ConfigError);
}

TEST_CASE("attribute weights shape the draw") {
  SynthConfig sc = grid_config();
  sc.attr_weights["sex"] = {1.0, 0.0};
  sc.attr_weights["hispanic"] = {0.0, 1.0};
  Dataset d = generate_synthetic(sc);
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    CHECK(d.value(r, attr_idx::kSex) == 0);
    CHECK(d.value(r, attr_idx::kHispanic) == 1);
  }
  sc.attr_weights["sex"] = {1.0};  // wrong domain size
  CHECK_THROWS_AS((void)generate_synthetic(sc), ConfigError);
}

TEST_CASE("skewed blocks concentrate on few prototypes") {
  SynthConfig flat = grid_config();
  flat.skew_z = 0.0;
  SynthConfig skewed = grid_config();
  skewed.skew_z = 2.0;
  skewed.pool_size = 4;
  skewed.age_mixing = false;

  auto top_share = [](const Dataset& d) {
    Projection proj = Projection::plain(d.schema(), {"sex", "age", "hispanic", "race"});
    double share_sum = 0;
    const auto& blocks = d.units(GeoLevel::block);
    for (const GeoId& b : blocks) {
      Histogram h = project_unit(d, proj, b);
      std::int64_t top = 0;
      for (const auto& [p, c] : h) top = std::max(top, c);
      share_sum += static_cast<double>(top) / static_cast<double>(h.total());
    }
    return share_sum / static_cast<double>(blocks.size());
  };
  CHECK(top_share(generate_synthetic(skewed)) > 0.5);
  CHECK(top_share(generate_synthetic(flat)) < 0.3);
}

TEST_CASE("age mixing stays within the five-year band") {
  SynthConfig sc = grid_config();
  sc.skew_z = 2.0;
  sc.pool_size = 2;
  sc.age_mixing = true;
  Dataset d = generate_synthetic(sc);
  for (const GeoId& block : d.units(GeoLevel::block)) {
    std::set<AttrValue> bands;
    for (std::size_t r : d.rows_in(block)) {
      bands.insert(d.value(r, attr_idx::kAge) / 5);
    }
    // Two pool profiles cover at most two five-year bands.
    CHECK(bands.size() <= 2);
  }
}

TEST_CASE("csv round trip preserves the dataset") {
  Dataset d = generate_synthetic(grid_config());
  auto path = temp_file("censuslab_roundtrip.csv");
  save_microdata(path.string(), d);
  Dataset back = load_microdata(path.string(), d.schema());
  REQUIRE(back.n_records() == d.n_records());
  for (std::size_t r = 0; r < d.n_records(); ++r) {
    const auto a = d.record(r), b = back.record(r);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv loader understands delimiters and column maps") {
  auto path = temp_file("censuslab_tabbed.tsv");
  write_text_file(path.string(),
                  "state\tcounty\ttract\tblock\thhgq\tsex\tyears\thispanic\trace\n"
                  "0\t0\t0\t0\t0\tmale\t35\tno\t1\n"
                  "0\t0\t0\t1\t0\tfemale\t36\tyes\t63\n");
  LoadOptions opt;
  opt.delimiter = '\t';
  opt.columns.map["age"] = "years";
  Dataset d = load_microdata(path.string(), canonical_schema(), opt);
  REQUIRE(d.n_records() == 2);
  CHECK(d.value(0, attr_idx::kSex) == 0);
  CHECK(d.value(0, attr_idx::kAge) == 35);
  CHECK(d.value(0, attr_idx::kRace) == 0);
  CHECK(d.value(1, attr_idx::kSex) == 1);
  CHECK(d.value(1, attr_idx::kHispanic) == 1);
  CHECK(d.value(1, attr_idx::kRace) == 62);
  std::filesystem::remove(path);
}

TEST_CASE("csv loader reports the offending row") {
  auto path = temp_file("censuslab_bad.csv");

  write_text_file(path.string(),
                  "state,county,tract,block,hhgq,sex,age,hispanic,race\n"
                  "0,0,0,0,0,male,35,no,1\n"
                  "0,0,0,0,0,male,200,no,1\n");
  try {
    (void)load_microdata(path.string(), canonical_schema());
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("200") != std::string::npos);
  }

  write_text_file(path.string(),
                  "state,county,tract,block,hhgq,sex,age,hispanic,race\n"
                  "0,0,0,0,0,male,35\n");
  CHECK_THROWS_AS((void)load_microdata(path.string(), canonical_schema()), DataError);

  write_text_file(path.string(), "state,county\n0,0\n");
  CHECK_THROWS_AS((void)load_microdata(path.string(), canonical_schema()), DataError);

  CHECK_THROWS_AS((void)load_microdata("/nonexistent/never.csv", canonical_schema()),
                  DataError);
  std::filesystem::remove(path);
}

TEST_CASE("experiment block panel picks the size ladder") {
  SynthConfig sc;
  sc.blocks_per_tract = 8;
  sc.block_populations = {10, 20, 40, 80, 160, 320, 640, 1280};
  sc.seed = 5;
  Dataset d = generate_synthetic(sc);
  std::vector<GeoId> panel = select_experiment_blocks(d);
  std::set<std::size_t> sizes;
  for (const GeoId& b : panel) sizes.insert(d.rows_in(b).size());
  // Largest block plus the halving ladder M/2..M/16 and the mean-sized block.
  CHECK(sizes.count(1280) == 1);
  CHECK(sizes.count(640) == 1);
  CHECK(sizes.count(320) == 1);
  CHECK(sizes.count(160) == 1);
  CHECK(sizes.count(80) == 1);
  CHECK(std::is_sorted(panel.begin(), panel.end()));
}

TEST_CASE("tract sampling is deterministic and bounded") {
  Dataset d = generate_synthetic(grid_config());
  auto a = sample_tracts(d, 3, 9);
  auto b = sample_tracts(d, 3, 9);
  CHECK(a == b);
  CHECK(a.size() == 3);
  std::set<GeoId> seen(a.begin(), a.end());
  CHECK(seen.size() == 3);
  auto c = sample_tracts(d, 3, 10);
  CHECK(a != c);
  CHECK_THROWS_AS((void)sample_tracts(d, 99, 1), SamplingError);
}
