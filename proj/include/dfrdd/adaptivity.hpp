#ifndef DFRDD_ADAPTIVITY_HPP
#define DFRDD_ADAPTIVITY_HPP

#include "dfrdd/geometry.hpp"
#include "dfrdd/optimizer.hpp"
#include "dfrdd/residual.hpp"

#include <functional>
#include <map>
#include <ostream>
#include <vector>

namespace dfrdd {

struct RefinementConfig {
  double tau = 0.66;
  int max_ref = 5;
  std::vector<int> modes_per_child{5};
  int iterations = 500;        // per level before each refinement
  int final_iterations = 1000;  // after the last refinement

  void validate() const;
};

struct IndicatorEntry {
  int parent_id = 0;
  int child_index = 0;
  double epsilon = 0.0;
  BoxDomain child;
};

struct IndicatorTable {
  std::vector<IndicatorEntry> entries;
  double max() const;
};

void write_indicator_csv(const IndicatorTable& table, std::ostream& os);

/// Builds the block of a box from its mode counts and the rule of the given role.
using BlockFactory = std::function<BoxBlock(const BoxDomain&, const std::vector<int>&, RuleRole)>;

/// Candidate children of every box in the cover, without children that repeat
/// an existing box or an earlier candidate.
std::vector<IndicatorEntry> candidate_children(const Cover& cover);

/// Local loss of u on each candidate child, using the child's own DD modes
/// and training rule.
IndicatorTable indicators(const FieldFunction& u, const ScalarField& f, const Cover& cover,
                          const RefinementConfig& config, const BlockFactory& factory);

/// Entries with epsilon > tau * max(epsilon), as indices into the table.
std::vector<std::size_t> mark(const IndicatorTable& table, double tau);

struct RefinementResult {
  Cover cover;
  std::vector<HistoryRow> history;
  std::vector<Cover> snapshots;  // cover at the start of each level
  std::vector<IndicatorTable> tables;
  std::vector<long> level_start;  // iteration at which each level starts
};

/// Algorithm: train, estimate, mark, extend; repeated max_ref times, then a
/// final training phase. Parameters persist across levels.
RefinementResult refine_loop(Trainer& trainer, Cover cover, std::map<int, std::vector<int>> modes,
                             const RefinementConfig& config, const BlockFactory& factory);

/// Training and validation blocks for every box of a cover.
std::vector<BoxBlock> make_blocks(const Cover& cover, const std::map<int, std::vector<int>>& modes,
                                  RuleRole role, const BlockFactory& factory);

}  // namespace dfrdd

#endif  // DFRDD_ADAPTIVITY_HPP
