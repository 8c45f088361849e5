#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "censuslab/dataset.hpp"
#include "censuslab/ingest.hpp"
#include "censuslab/rng.hpp"
#include "censuslab/schema.hpp"

namespace censuslab::testing {

// Four geography levels with two codes each plus two small demographic
// attributes; cheap enough for exhaustive checks.
inline AttributeSchema tiny_schema() {
  auto geo = [](std::string name) {
    Attribute a;
    a.name = std::move(name);
    a.geography = true;
    a.lo = 0;
    a.hi = 1;
    return a;
  };
  Attribute color;
  color.name = "color";
  color.labels = {"red", "green", "blue"};
  Attribute shape;
  shape.name = "shape";
  shape.labels = {"round", "square"};
  return AttributeSchema(
      {geo("state"), geo("county"), geo("tract"), geo("block"), color, shape});
}

inline Dataset random_dataset(const AttributeSchema& schema, std::size_t n,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<AttrValue>> rows(n);
  for (auto& row : rows) {
    row.resize(schema.size());
    for (std::size_t a = 0; a < schema.size(); ++a) {
      row[a] = static_cast<AttrValue>(rng.uniform_below(schema.at(a).domain_size()));
    }
  }
  return Dataset::from_rows(schema, rows);
}

// Canonical-schema rows with fixed geography; age/race/hispanic supplied as
// domain indices (race index = census code - 1).
struct PersonSpec {
  AttrValue sex = 0;
  AttrValue age = 0;
  AttrValue hispanic = 0;
  AttrValue race = 0;
  int count = 1;
};

inline Dataset people_in_one_block(const std::vector<PersonSpec>& specs,
                                   AttrValue block = 0) {
  AttributeSchema schema = canonical_schema();
  std::vector<std::vector<AttrValue>> rows;
  for (const auto& s : specs) {
    for (int i = 0; i < s.count; ++i) {
      rows.push_back({0, 0, 0, block, 0, s.sex, s.age, s.hispanic, s.race});
    }
  }
  return Dataset::from_rows(schema, rows);
}

// A small single-block tract with a hand-checkable composition: mostly white
// males at single years of age, a few black and multi-race members, one
// "some other race" hispanic. The expected tract-table counts are asserted
// in the tabulation tests.
inline Dataset small_tract_fixture() {
  std::vector<PersonSpec> specs;
  auto add = [&](AttrValue age, AttrValue hisp, AttrValue race, int n) {
    specs.push_back({0, age, hisp, race, n});
  };
  // White alone, census code 1, race index 0.
  add(0, 0, 0, 7); add(0, 1, 0, 2);
  add(1, 0, 0, 15);
  add(2, 0, 0, 14);
  add(3, 0, 0, 6);
  add(4, 0, 0, 8); add(4, 1, 0, 1);
  add(5, 0, 0, 17);
  // Black alone, code 2, index 1.
  add(1, 0, 1, 1);
  add(2, 0, 1, 3);
  add(4, 0, 1, 2);
  // Some other race alone, code 6, index 5.
  add(3, 1, 5, 1);
  // White-black combination, code 7, index 6.
  add(1, 0, 6, 2);
  add(2, 0, 6, 1); add(2, 1, 6, 1);
  add(4, 0, 6, 1); add(4, 1, 6, 1);
  // A different two-race combination, code 31, index 30.
  add(30, 0, 30, 10); add(30, 1, 30, 5);
  return people_in_one_block(specs);
}

// Block-level synthetic population with census-plausible attribute mixes:
// ages heaped on multiples of five, mostly non-hispanic, race mass
// concentrated on the single-group codes.
inline SynthConfig plausible_block_synth(int pop_min, int pop_max, int pool,
                                         double skew, std::uint64_t seed) {
  SynthConfig sc;
  sc.n_states = 1;
  sc.counties_per_state = 1;
  sc.tracts_per_county = 1;
  sc.blocks_per_tract = 1;
  sc.block_pop_min = pop_min;
  sc.block_pop_max = pop_max;
  sc.skew_z = skew;
  sc.pool_size = pool;
  sc.age_mixing = false;
  sc.seed = seed;
  std::vector<double> race(kNumRaceCodes, 0.0);
  race[0] = 0.72; race[1] = 0.125; race[2] = 0.009; race[3] = 0.048;
  race[4] = 0.002; race[5] = 0.062;
  for (int i = 6; i < kNumRaceCodes; ++i) race[i] = 0.034 / 57.0;
  sc.attr_weights["race"] = race;
  sc.attr_weights["hispanic"] = {0.84, 0.16};
  std::vector<double> age(kMaxAge + 1, 0.0);
  for (int a = 0; a <= 85; a += 5) age[a] = a < 20 ? 0.8 : (a <= 60 ? 1.2 : 0.6);
  sc.attr_weights["age"] = age;
  return sc;
}

}  // namespace censuslab::testing
