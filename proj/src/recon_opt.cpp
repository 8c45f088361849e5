#include "censuslab/recon_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>

#include "censuslab/errors.hpp"
#include "censuslab/parallel.hpp"
#include "censuslab/rng.hpp"

namespace censuslab {

RelaxedDataset::RelaxedDataset(const AttributeSchema& schema,
                               std::vector<std::uint16_t> attrs, std::size_t n_rows)
    : n_rows_(n_rows) {
  if (attrs.empty()) throw ConfigError("relaxed dataset needs at least one attribute");
  std::sort(attrs.begin(), attrs.end());
  if (std::adjacent_find(attrs.begin(), attrs.end()) != attrs.end()) {
    throw ConfigError("relaxed dataset attributes must be distinct");
  }
  for (std::uint16_t a : attrs) {
    if (a >= schema.size()) {
      throw SchemaError("attribute index " + std::to_string(a) + " out of schema range");
    }
    Slot s;
    s.attr = a;
    s.offset = stride_;
    s.size = schema.at(a).domain_size();
    stride_ += s.size;
    slots_.push_back(s);
  }
  data_.assign(n_rows_ * stride_, 0.0);
}

const RelaxedDataset::Slot* RelaxedDataset::slot_of(std::uint16_t attr) const {
  for (const Slot& s : slots_) {
    if (s.attr == attr) return &s;
  }
  return nullptr;
}

std::vector<std::uint16_t> RelaxedDataset::attrs() const {
  std::vector<std::uint16_t> out;
  out.reserve(slots_.size());
  for (const Slot& s : slots_) out.push_back(s.attr);
  return out;
}

void RelaxedDataset::project_to_simplex() {
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (const Slot& s : slots_) {
      auto c = cell(r, s);
      double sum = 0.0;
      for (double& w : c) {
        w = std::clamp(w, 0.0, 1.0);
        sum += w;
      }
      if (sum <= 0.0) {
        const double u = 1.0 / static_cast<double>(s.size);
        for (double& w : c) w = u;
      } else {
        for (double& w : c) w /= sum;
      }
    }
  }
}

namespace {

double accepted_mass(std::span<const double> cell, const AttrPredicate& p) {
  double sum = 0.0;
  for (const auto& [lo, hi] : p.ranges) {
    for (AttrValue v = lo; v <= hi && v < cell.size(); ++v) sum += cell[v];
  }
  return sum;
}

// Everything loss_and_gradient precomputes about one cell predicate.
struct PreparedCell {
  std::vector<std::pair<std::size_t, std::size_t>> atoms;  // (slot, atom id)
  std::size_t mask_id = 0;
};

// Distinct accepted-mass sums, so cells sharing a predicate on a slot share
// the work of computing it.
struct AtomTable {
  struct Atom {
    std::size_t slot = 0;
    std::vector<std::pair<AttrValue, AttrValue>> ranges;
  };
  std::vector<Atom> atoms;

  std::size_t intern(std::size_t slot,
                     const std::vector<std::pair<AttrValue, AttrValue>>& ranges) {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (atoms[i].slot == slot && atoms[i].ranges == ranges) return i;
    }
    atoms.push_back({slot, ranges});
    return atoms.size() - 1;
  }
};

// Distinct constrained-slot sets; the complement products (totals of the
// other slots) are shared per set.
struct MaskTable {
  std::vector<std::vector<std::size_t>> complements;  // slots outside the set
  std::vector<std::uint64_t> keys;

  std::size_t intern(std::uint64_t key, std::size_t n_slots) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i] == key) return i;
    }
    keys.push_back(key);
    std::vector<std::size_t> comp;
    for (std::size_t s = 0; s < n_slots; ++s) {
      if (!(key >> s & 1)) comp.push_back(s);
    }
    complements.push_back(std::move(comp));
    return keys.size() - 1;
  }
};

struct PreparedLoss {
  AtomTable atom_table;
  MaskTable mask_table;
  std::vector<PreparedCell> cells;
};

PreparedLoss prepare_cells(const RelaxedDataset& x,
                           const std::vector<CellPredicate>& cells) {
  PreparedLoss out;
  const auto& slots = x.slots();
  for (const CellPredicate& cp : cells) {
    PreparedCell pc;
    std::uint64_t key = 0;
    for (const AttrPredicate& ap : cp.attrs) {
      const RelaxedDataset::Slot* slot = x.slot_of(static_cast<std::uint16_t>(ap.attr));
      if (slot == nullptr) {
        throw SchemaError("cell predicate constrains attribute " +
                          std::to_string(ap.attr) +
                          ", which the relaxed dataset does not carry");
      }
      const std::size_t slot_idx =
          static_cast<std::size_t>(slot - slots.data());
      key |= std::uint64_t{1} << slot_idx;
      pc.atoms.emplace_back(slot_idx, out.atom_table.intern(slot_idx, ap.ranges));
    }
    pc.mask_id = out.mask_table.intern(key, slots.size());
    out.cells.push_back(std::move(pc));
  }
  return out;
}

}  // namespace

double relaxed_answer(const RelaxedDataset& x, const CellPredicate& pred) {
  for (const AttrPredicate& ap : pred.attrs) {
    if (x.slot_of(static_cast<std::uint16_t>(ap.attr)) == nullptr) {
      throw SchemaError("cell predicate constrains attribute " + std::to_string(ap.attr) +
                        ", which the relaxed dataset does not carry");
    }
  }
  double ans = 0.0;
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    double term = 1.0;
    for (const RelaxedDataset::Slot& s : x.slots()) {
      const AttrPredicate* ap = pred.find(s.attr);
      const auto c = x.cell(r, s);
      if (ap == nullptr) {
        double sum = 0.0;
        for (double w : c) sum += w;
        term *= sum;
      } else {
        term *= accepted_mass(c, *ap);
      }
    }
    ans += term;
  }
  return ans;
}

double loss_and_gradient(const RelaxedDataset& x,
                         const std::vector<CellPredicate>& cells,
                         const std::vector<double>& targets,
                         std::vector<double>* grad) {
  if (cells.size() != targets.size()) {
    throw ConfigError("cells and targets differ in length");
  }
  const auto& slots = x.slots();
  const std::size_t n = x.n_rows();
  const std::size_t n_slots = slots.size();
  const PreparedLoss prep = prepare_cells(x, cells);
  const std::size_t n_atoms = prep.atom_table.atoms.size();
  const std::size_t n_masks = prep.mask_table.keys.size();

  // Per row: prefix sums per slot (slot s occupies offset+slot_index entries,
  // one extra per slot), slot totals, atom values, complement products.
  const std::size_t pstride = x.stride() + n_slots;
  std::vector<double> prefix(n * pstride);
  std::vector<double> totals(n * n_slots);
  std::vector<double> atom_vals(n * n_atoms);
  // For each mask: product over complement slots of their totals, plus the
  // same product leaving out each complement slot in turn.
  std::vector<double> comp_prod(n * n_masks);
  std::vector<std::size_t> comp_offsets(n_masks + 1, 0);
  for (std::size_t m = 0; m < n_masks; ++m) {
    comp_offsets[m + 1] = comp_offsets[m] + prep.mask_table.complements[m].size();
  }
  std::vector<double> comp_excl(n * comp_offsets[n_masks]);
  std::vector<double> scratch_pre(n_slots + 1);
  std::vector<double> scratch_suf(n_slots + 1);

  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.row(r);
    double* pre = prefix.data() + r * pstride;
    for (std::size_t s = 0; s < n_slots; ++s) {
      const std::size_t po = slots[s].offset + s;
      pre[po] = 0.0;
      for (std::size_t v = 0; v < slots[s].size; ++v) {
        pre[po + v + 1] = pre[po + v] + row[slots[s].offset + v];
      }
      totals[r * n_slots + s] = pre[po + slots[s].size];
    }
    for (std::size_t a = 0; a < n_atoms; ++a) {
      const auto& atom = prep.atom_table.atoms[a];
      const std::size_t po = slots[atom.slot].offset + atom.slot;
      double sum = 0.0;
      for (const auto& [lo, hi] : atom.ranges) {
        sum += pre[po + hi + 1] - pre[po + lo];
      }
      atom_vals[r * n_atoms + a] = sum;
    }
    for (std::size_t m = 0; m < n_masks; ++m) {
      const auto& comp = prep.mask_table.complements[m];
      scratch_pre[0] = 1.0;
      for (std::size_t i = 0; i < comp.size(); ++i) {
        scratch_pre[i + 1] = scratch_pre[i] * totals[r * n_slots + comp[i]];
      }
      scratch_suf[comp.size()] = 1.0;
      for (std::size_t i = comp.size(); i-- > 0;) {
        scratch_suf[i] = scratch_suf[i + 1] * totals[r * n_slots + comp[i]];
      }
      comp_prod[r * n_masks + m] = scratch_pre[comp.size()];
      for (std::size_t i = 0; i < comp.size(); ++i) {
        comp_excl[r * comp_offsets[n_masks] + comp_offsets[m] + i] =
            scratch_pre[i] * scratch_suf[i + 1];
      }
    }
  }

  // Answers.
  std::vector<double> answers(cells.size(), 0.0);
  std::vector<double> cell_terms;  // per cell, per row: product of atom values
  cell_terms.assign(cells.size() * n, 0.0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const PreparedCell& pc = prep.cells[c];
    double ans = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double s_prod = 1.0;
      for (const auto& [slot, atom] : pc.atoms) s_prod *= atom_vals[r * n_atoms + atom];
      cell_terms[c * n + r] = s_prod;
      ans += s_prod * comp_prod[r * n_masks + pc.mask_id];
    }
    answers[c] = ans;
  }

  double loss = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double res = answers[c] - targets[c];
    loss += res * res;
  }
  if (grad == nullptr) return loss;

  grad->assign(x.flat().size(), 0.0);
  // Difference array, same layout as the prefix sums: adding g to positions
  // lo..hi of a slot becomes diff[lo] += g, diff[hi+1] -= g.
  std::vector<double> diff(n * pstride, 0.0);
  // Accumulated coefficient per (row, mask) for the unconstrained slots.
  std::vector<double> kappa(n * n_masks, 0.0);
  std::vector<double> s_vals;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const PreparedCell& pc = prep.cells[c];
    const double coeff = 2.0 * (answers[c] - targets[c]);
    if (coeff == 0.0) continue;
    const std::size_t k = pc.atoms.size();
    s_vals.assign(k, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < k; ++i) {
        s_vals[i] = atom_vals[r * n_atoms + pc.atoms[i].second];
      }
      scratch_pre[0] = 1.0;
      for (std::size_t i = 0; i < k; ++i) scratch_pre[i + 1] = scratch_pre[i] * s_vals[i];
      scratch_suf[k] = 1.0;
      for (std::size_t i = k; i-- > 0;) scratch_suf[i] = scratch_suf[i + 1] * s_vals[i];

      const double ot = comp_prod[r * n_masks + pc.mask_id];
      double* d = diff.data() + r * pstride;
      for (std::size_t i = 0; i < k; ++i) {
        const double g = coeff * ot * scratch_pre[i] * scratch_suf[i + 1];
        if (g == 0.0) continue;
        const std::size_t slot = pc.atoms[i].first;
        const std::size_t po = slots[slot].offset + slot;
        const auto& atom = prep.atom_table.atoms[pc.atoms[i].second];
        for (const auto& [lo, hi] : atom.ranges) {
          d[po + lo] += g;
          d[po + hi + 1] -= g;
        }
      }
      kappa[r * n_masks + pc.mask_id] += coeff * cell_terms[c * n + r];
    }
  }
  // Unconstrained slots: every value of the slot shares the same derivative.
  for (std::size_t r = 0; r < n; ++r) {
    double* d = diff.data() + r * pstride;
    for (std::size_t m = 0; m < n_masks; ++m) {
      const double kap = kappa[r * n_masks + m];
      if (kap == 0.0) continue;
      const auto& comp = prep.mask_table.complements[m];
      for (std::size_t i = 0; i < comp.size(); ++i) {
        const double g =
            kap * comp_excl[r * comp_offsets[n_masks] + comp_offsets[m] + i];
        if (g == 0.0) continue;
        const std::size_t slot = comp[i];
        const std::size_t po = slots[slot].offset + slot;
        d[po] += g;
        d[po + slots[slot].size] -= g;
      }
    }
  }
  // Materialize the difference arrays.
  for (std::size_t r = 0; r < n; ++r) {
    const double* d = diff.data() + r * pstride;
    double* g = grad->data() + r * x.stride();
    for (std::size_t s = 0; s < n_slots; ++s) {
      const std::size_t po = slots[s].offset + s;
      double running = 0.0;
      for (std::size_t v = 0; v < slots[s].size; ++v) {
        running += d[po + v];
        g[slots[s].offset + v] = running;
      }
    }
  }
  return loss;
}

namespace {

void init_one_hot(RelaxedDataset* x, const OptConfig& cfg,
                  const BaselineMarginals* baseline) {
  if (cfg.init == InitMode::random) {
    Rng rng(derive_seed(cfg.seed, "opt_init"));
    for (std::size_t r = 0; r < x->n_rows(); ++r) {
      for (const auto& s : x->slots()) {
        auto c = x->cell(r, s);
        double sum = 0.0;
        for (double& w : c) {
          w = rng.exponential();
          sum += w;
        }
        for (double& w : c) w /= sum;
      }
    }
    return;
  }
  if (baseline == nullptr) {
    throw ConfigError("baseline initialization needs per-attribute marginals");
  }
  for (const auto& s : x->slots()) {
    const auto it = baseline->find(s.attr);
    if (it == baseline->end() || it->second.size() != s.size) {
      throw ConfigError("baseline marginal missing or mis-sized for attribute " +
                        std::to_string(s.attr));
    }
    double sum = 0.0;
    for (double w : it->second) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw ConfigError("baseline marginals must be finite and nonnegative");
      }
      sum += w;
    }
    if (sum <= 0.0) throw ConfigError("baseline marginal sums to zero");
    for (std::size_t r = 0; r < x->n_rows(); ++r) {
      auto c = x->cell(r, s);
      for (std::size_t v = 0; v < s.size; ++v) c[v] = it->second[v] / sum;
    }
  }
}

void materialize_tent(const std::vector<double>& pos, RelaxedDataset* x) {
  const auto& slots = x->slots();
  for (std::size_t r = 0; r < x->n_rows(); ++r) {
    for (std::size_t s = 0; s < slots.size(); ++s) {
      auto c = x->cell(r, slots[s]);
      std::fill(c.begin(), c.end(), 0.0);
      if (slots[s].size == 1) {
        c[0] = 1.0;
        continue;
      }
      const double p = pos[r * slots.size() + s];
      std::size_t f = static_cast<std::size_t>(p);
      if (f > slots[s].size - 2) f = slots[s].size - 2;
      const double frac = p - static_cast<double>(f);
      c[f] = 1.0 - frac;
      c[f + 1] = frac;
    }
  }
}

OptRun optimize_scalar(const AttributeSchema& schema, std::vector<std::uint16_t> attrs,
                       std::size_t n_rows, const std::vector<CellPredicate>& cells,
                       const std::vector<double>& targets, const OptConfig& cfg,
                       const BaselineMarginals* baseline) {
  OptRun run{RelaxedDataset(schema, std::move(attrs), n_rows)};
  const auto& slots = run.x.slots();
  std::vector<double> pos(n_rows * slots.size(), 0.0);

  if (cfg.init == InitMode::random) {
    Rng rng(derive_seed(cfg.seed, "opt_init"));
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t s = 0; s < slots.size(); ++s) {
        pos[r * slots.size() + s] =
            rng.uniform01() * static_cast<double>(slots[s].size - 1);
      }
    }
  } else {
    if (baseline == nullptr) {
      throw ConfigError("baseline initialization needs per-attribute marginals");
    }
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const auto it = baseline->find(slots[s].attr);
      if (it == baseline->end() || it->second.size() != slots[s].size) {
        throw ConfigError("baseline marginal missing or mis-sized for attribute " +
                          std::to_string(slots[s].attr));
      }
      double sum = 0.0;
      double mean = 0.0;
      for (std::size_t v = 0; v < it->second.size(); ++v) {
        sum += it->second[v];
        mean += static_cast<double>(v) * it->second[v];
      }
      if (sum <= 0.0) throw ConfigError("baseline marginal sums to zero");
      mean /= sum;
      for (std::size_t r = 0; r < n_rows; ++r) pos[r * slots.size() + s] = mean;
    }
  }

  std::vector<double> grad;
  materialize_tent(pos, &run.x);
  for (int it = 0; it < cfg.n_iterations; ++it) {
    const double loss = loss_and_gradient(run.x, cells, targets, &grad);
    run.trajectory.push_back(loss);
    if (loss <= cfg.tolerance) {
      run.final_loss = loss;
      run.iterations_run = it;
      return run;
    }
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t s = 0; s < slots.size(); ++s) {
        if (slots[s].size < 2) continue;
        const double p = pos[r * slots.size() + s];
        std::size_t f = static_cast<std::size_t>(p);
        if (f > slots[s].size - 2) f = slots[s].size - 2;
        const double* g = grad.data() + r * run.x.stride() + slots[s].offset;
        const double dpos = g[f + 1] - g[f];
        double np = p - cfg.learning_rate * dpos;
        np = std::clamp(np, 0.0, static_cast<double>(slots[s].size - 1));
        pos[r * slots.size() + s] = np;
      }
    }
    materialize_tent(pos, &run.x);
    run.iterations_run = it + 1;
  }
  run.final_loss = loss_and_gradient(run.x, cells, targets, nullptr);
  run.trajectory.push_back(run.final_loss);
  return run;
}

}  // namespace

OptRun optimize(const AttributeSchema& schema, std::vector<std::uint16_t> attrs,
                std::size_t n_rows, const std::vector<CellPredicate>& cells,
                const std::vector<double>& targets, const OptConfig& cfg,
                const BaselineMarginals* baseline) {
  if (cfg.n_iterations < 0) throw ConfigError("iteration count must be nonnegative");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (cfg.encoding == Encoding::scalar) {
    return optimize_scalar(schema, std::move(attrs), n_rows, cells, targets, cfg,
                           baseline);
  }

  OptRun run{RelaxedDataset(schema, std::move(attrs), n_rows)};
  init_one_hot(&run.x, cfg, baseline);

  std::vector<double> grad;
  for (int it = 0; it < cfg.n_iterations; ++it) {
    const double loss = loss_and_gradient(run.x, cells, targets, &grad);
    run.trajectory.push_back(loss);
    if (loss <= cfg.tolerance) {
      run.final_loss = loss;
      run.iterations_run = it;
      return run;
    }
    auto& flat = run.x.flat();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      flat[i] -= cfg.learning_rate * grad[i];
    }
    run.x.project_to_simplex();
    run.iterations_run = it + 1;
  }
  run.final_loss = loss_and_gradient(run.x, cells, targets, nullptr);
  run.trajectory.push_back(run.final_loss);
  return run;
}

Histogram discretize(const RelaxedDataset& x, const DiscretizeRule& rule) {
  Histogram out;
  std::optional<Rng> rng;
  if (rule.kind == DiscretizeRule::Kind::sample) rng.emplace(rule.seed);

  Prototype proto;
  proto.attrs = x.attrs();
  proto.values.assign(proto.attrs.size(), ProtoValue::point(0));
  std::vector<double> weights;
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    for (std::size_t s = 0; s < x.slots().size(); ++s) {
      const auto c = x.cell(r, x.slots()[s]);
      std::size_t pick = 0;
      if (rule.kind == DiscretizeRule::Kind::argmax) {
        for (std::size_t v = 1; v < c.size(); ++v) {
          if (c[v] > c[pick]) pick = v;
        }
      } else {
        weights.assign(c.begin(), c.end());
        pick = rng->categorical(weights);
      }
      proto.values[s] = ProtoValue::point(static_cast<AttrValue>(pick));
    }
    out.add(proto, 1);
  }
  return out;
}

RankedReconstruction run_crr(const AttributeSchema& schema,
                             std::vector<std::uint16_t> attrs, std::size_t n_rows,
                             const std::vector<CellPredicate>& cells,
                             const std::vector<double>& targets, const CrrConfig& cfg,
                             const BaselineMarginals* baseline) {
  if (cfg.n_runs < 1) throw ConfigError("confidence ranking needs at least one run");

  RankedReconstruction out;
  out.n_rows = n_rows;
  out.n_runs = cfg.n_runs;
  out.per_run.resize(static_cast<std::size_t>(cfg.n_runs));
  out.trajectories.resize(static_cast<std::size_t>(cfg.n_runs));
  out.final_losses.resize(static_cast<std::size_t>(cfg.n_runs));
  {
    RelaxedDataset probe(schema, attrs, 0);
    out.attrs = probe.attrs();
  }

  parallel_for(static_cast<std::size_t>(cfg.n_runs), cfg.workers, [&](std::size_t r) {
    OptConfig run_cfg = cfg.opt;
    run_cfg.seed = cfg.opt.seed + r;
    OptRun run = optimize(schema, attrs, n_rows, cells, targets, run_cfg, baseline);
    DiscretizeRule rule = cfg.rule;
    if (rule.kind == DiscretizeRule::Kind::sample) {
      rule.seed = derive_seed(cfg.rule.seed, "discretize", r);
    }
    out.per_run[r] = discretize(run.x, rule);
    out.trajectories[r] = std::move(run.trajectory);
    out.final_losses[r] = run.final_loss;
  });

  std::map<Prototype, std::pair<int, std::int64_t>, PrototypeLess> tally;
  for (const Histogram& h : out.per_run) {
    for (const auto& [proto, count] : h.sorted_items()) {
      auto& [freq, total] = tally[proto];
      freq += 1;
      total += count;
    }
  }
  out.ranked.reserve(tally.size());
  for (const auto& [proto, ft] : tally) {
    RankedPrototype rp;
    rp.proto = proto;
    rp.frequency = ft.first;
    rp.total_occurrences = ft.second;
    rp.mean_multiplicity =
        static_cast<double>(ft.second) / static_cast<double>(ft.first);
    out.ranked.push_back(std::move(rp));
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const RankedPrototype& a, const RankedPrototype& b) {
                     if (a.frequency != b.frequency) return a.frequency > b.frequency;
                     const auto lhs =
                         a.total_occurrences * static_cast<std::int64_t>(b.frequency);
                     const auto rhs =
                         b.total_occurrences * static_cast<std::int64_t>(a.frequency);
                     if (lhs != rhs) return lhs > rhs;
                     return compare(a.proto, b.proto) < 0;
                   });
  return out;
}

std::vector<std::uint16_t> crr_attributes(const AttributeSchema& schema,
                                          const std::vector<Workload>& workloads) {
  std::vector<bool> used(schema.size(), false);
  for (const Workload& w : workloads) {
    for (const WorkloadCell& cell : w.cells) {
      for (const AttrPredicate& ap : cell.pred.attrs) {
        if (ap.attr >= schema.size()) {
          throw SchemaError("workload constrains attribute index " +
                            std::to_string(ap.attr) + " outside the schema");
        }
        if (!schema.at(ap.attr).geography) used[ap.attr] = true;
      }
    }
  }
  std::vector<std::uint16_t> out;
  for (std::size_t a = 0; a < used.size(); ++a) {
    if (used[a]) out.push_back(static_cast<std::uint16_t>(a));
  }
  if (out.empty()) {
    throw ConfigError("workloads constrain no demographic attribute to optimize over");
  }
  return out;
}

UnitTargets unit_targets(const TabulatedUnit& tu, const std::vector<Workload>& workloads) {
  UnitTargets out;
  std::optional<std::int64_t> population;
  for (const Workload& w : workloads) {
    const TableInstance* t = tu.find_table(w.name);
    if (t == nullptr) continue;
    if (t->counts.size() != w.cells.size()) {
      throw TablesError("table for workload '" + w.name + "' has " +
                        std::to_string(t->counts.size()) + " counts but the workload has " +
                        std::to_string(w.cells.size()) + " cells");
    }
    for (std::size_t c = 0; c < w.cells.size(); ++c) {
      out.cells.push_back(w.cells[c].pred);
      out.targets.push_back(static_cast<double>(t->counts[c]));
      if (w.cells[c].pred.attrs.empty() && !population) population = t->counts[c];
    }
  }
  if (out.cells.empty()) {
    throw TablesError("unit " + tu.unit.label() + " has no tables to reconstruct from");
  }
  if (!population) {
    throw TablesError("no all-accepting cell anchors the population of unit " +
                      tu.unit.label());
  }
  out.n_rows = static_cast<std::size_t>(*population);
  return out;
}

}  // namespace censuslab
