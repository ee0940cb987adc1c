#include "dfrdd/adaptivity.hpp"

#include <algorithm>
#include <iomanip>
#include <stdexcept>

namespace dfrdd {

void RefinementConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0,1]");
  if (max_ref < 0) throw std::invalid_argument("max_ref must be non-negative");
  if (iterations < 0 || final_iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (modes_per_child.empty()) throw std::invalid_argument("modes_per_child must be set");
}

double IndicatorTable::max() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.epsilon);
  return m;
}

void write_indicator_csv(const IndicatorTable& table, std::ostream& os) {
  os << "parent_id,child_index,epsilon\n" << std::setprecision(17);
  for (const auto& e : table.entries) os << e.parent_id << ',' << e.child_index << ',' << e.epsilon << '\n';
}

std::vector<IndicatorEntry> candidate_children(const Cover& cover) {
  std::vector<IndicatorEntry> out;
  int temp_id = cover.next_id();
  for (const auto& box : cover.boxes) {
    const auto kids = subdivide(box, temp_id);
    temp_id += static_cast<int>(kids.size());
    for (std::size_t c = 0; c < kids.size(); ++c) {
      const auto& kid = kids[c];
      const auto same = [&](const BoxDomain& b) { return same_region(b, kid); };
      if (std::any_of(cover.boxes.begin(), cover.boxes.end(), same)) continue;
      if (std::any_of(out.begin(), out.end(), [&](const IndicatorEntry& e) { return same(e.child); })) continue;
      out.push_back({box.id, static_cast<int>(c), 0.0, kid});
    }
  }
  return out;
}

IndicatorTable indicators(const FieldFunction& u, const ScalarField& f, const Cover& cover,
                          const RefinementConfig& config, const BlockFactory& factory) {
  IndicatorTable table;
  table.entries = candidate_children(cover);
  for (auto& e : table.entries) {
    const BoxBlock block = factory(e.child, config.modes_per_child, RuleRole::Training);
    const FieldSample s = u(block.rule().nodes);
    const VectorX r = block.pair(s.grad, f(block.rule().nodes));
    e.epsilon = r.squaredNorm();
  }
  return table;
}

std::vector<std::size_t> mark(const IndicatorTable& table, double tau) {
  std::vector<std::size_t> out;
  const double threshold = tau * table.max();
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    if (table.entries[i].epsilon > threshold) out.push_back(i);
  }
  return out;
}

std::vector<BoxBlock> make_blocks(const Cover& cover, const std::map<int, std::vector<int>>& modes,
                                  RuleRole role, const BlockFactory& factory) {
  std::vector<BoxBlock> blocks;
  for (const auto& box : cover.boxes) {
    const auto it = modes.find(box.id);
    if (it == modes.end()) throw std::invalid_argument("box " + std::to_string(box.id) + " has no modes");
    blocks.push_back(factory(box, it->second, role));
  }
  return blocks;
}

RefinementResult refine_loop(Trainer& trainer, Cover cover, std::map<int, std::vector<int>> modes,
                             const RefinementConfig& config, const BlockFactory& factory) {
  config.validate();
  RefinementResult result;
  auto install = [&] {
    trainer.set_blocks(make_blocks(cover, modes, RuleRole::Training, factory),
                       make_blocks(cover, modes, RuleRole::Validation, factory));
    result.snapshots.push_back(cover);
    result.level_start.push_back(trainer.iteration());
  };
  auto append = [&](const std::vector<HistoryRow>& rows) {
    result.history.insert(result.history.end(), rows.begin(), rows.end());
  };

  install();
  for (int q = 0; q <= config.max_ref; ++q) {
    const bool last = q == config.max_ref;
    append(trainer.train(last ? config.final_iterations : config.iterations, q == 0));
    if (last) break;

    const Network& net = trainer.network();
    const Cutoff& cutoff = trainer.cutoff();
    const FieldFunction u = [&](const MatrixX& pts) {
      const FieldEval e = evaluate_field(net, cutoff, pts);
      return FieldSample{e.u, e.grad};
    };
    IndicatorTable table = indicators(u, trainer.source(), cover, config, factory);
    for (std::size_t i : mark(table, config.tau)) {
      BoxDomain child = table.entries[i].child;
      child.id = cover.next_id();
      modes[child.id] = config.modes_per_child;
      cover.boxes.push_back(std::move(child));
    }
    result.tables.push_back(std::move(table));
    install();
  }
  result.cover = std::move(cover);
  return result;
}

}  // namespace dfrdd
