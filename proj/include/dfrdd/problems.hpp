#ifndef DFRDD_PROBLEMS_HPP
#define DFRDD_PROBLEMS_HPP

#include "dfrdd/adaptivity.hpp"
#include "dfrdd/geometry.hpp"
#include "dfrdd/model.hpp"
#include "dfrdd/optimizer.hpp"
#include "dfrdd/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dfrdd {

/// u*, its gradient and f = -Laplacian(u*), all batched.
struct ManufacturedSolution {
  ScalarField u;
  GradientField grad;
  ScalarField f;
  std::string notes;
};

/// Region whose tensor rule is built once and restricted to every box it
/// contains.
struct RuleSource {
  BoxDomain region;
  GradingSpec spec;
};

/// Boxes added to the cover once the given number of iterations is reached.
struct StageAddition {
  int at_iteration = 0;
  std::vector<BoxDomain> boxes;
};

struct CaseSpec {
  int id = 0;
  std::string name;
  Architecture arch;
  Cover cover;
  std::map<int, std::vector<int>> modes;
  Cutoff cutoff;
  ManufacturedSolution exact;
  std::vector<RuleSource> rules;
  QuadratureRule overkill;  // error rule, exterior points already removed
  double lr = 1e-2;
  int iterations = 1000;
  std::optional<RefinementConfig> refinement;
  std::vector<StageAddition> stages;

  /// Total iterations over all stages or refinement levels.
  int total_iterations() const;
};

CaseSpec case1();
/// L-shape with `long_modes` x long_modes/2 modes per box (20 is the reference).
CaseSpec case2(int long_modes = 20);
CaseSpec case3();
CaseSpec case4();
CaseSpec case5();
/// Cases 4 and 5 without decomposition: one box (0, pi) with `modes` global
/// modes, same rule and total iteration budget as the adaptive run.
CaseSpec case4_reference(int modes = 40);
CaseSpec case5_reference(int modes = 60);

CaseSpec case_by_id(int id);

/// Overrides mode counts on every box: axis counts are assigned so that the
/// longer side receives the larger count.
void override_modes(CaseSpec& spec, std::vector<int> counts);
/// Overrides the training cell counts of every rule source in the same way.
void override_quad_points(CaseSpec& spec, std::vector<int> counts);

/// Rule for a box: the first source region containing it, restricted.
QuadratureRule rule_for(const CaseSpec& spec, const BoxDomain& box, RuleRole role);
BlockFactory block_factory(const CaseSpec& spec);

/// 100 sqrt(int |grad e|^2 + e^2) / sqrt(int |grad u*|^2 + u*^2) on the rule.
double relative_h1_error(const VectorX& u, const MatrixX& grad, const ManufacturedSolution& exact,
                         const QuadratureRule& rule, bool seminorm = false);
/// Error metric with u* precomputed on the case's overkill rule.
ErrorMetric make_error_metric(const CaseSpec& spec, bool seminorm = false);

/// Columns x[,y],u,u_star,grad_err on the overkill rule.
void write_solution_csv(const CaseSpec& spec, const Network& net, std::ostream& os);

struct RunSettings {
  std::uint64_t seed = 0;
  TrainOptions train;
};

struct RunResult {
  Network net;
  Cover cover;
  std::vector<HistoryRow> history;
  std::vector<Cover> snapshots;
  std::vector<IndicatorTable> tables;
  std::vector<long> level_start;
  LossBreakdown final_breakdown;
};

/// Trains the case from scratch: plain, staged or adaptive depending on the
/// spec.
RunResult run_case(const CaseSpec& spec, const RunSettings& settings);

}  // namespace dfrdd

#endif  // DFRDD_PROBLEMS_HPP
