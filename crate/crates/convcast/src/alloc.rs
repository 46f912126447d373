//! Deployment decisions: predicted platform utilization for a mix of block
//! instances, and the instance mix maximizing convolutions per cycle under a
//! per-resource utilization budget.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    descriptor, BlockKind, ConfigPoint, PlatformCapacity, ResourceKind, ResourceVector,
};
use crate::regression::{predict, ModelSet};

/// Resources constrained by default. MLUT is opted in separately.
const DEFAULT_CONSTRAINED: [ResourceKind; 4] = [
    ResourceKind::Llut,
    ResourceKind::Ff,
    ResourceKind::Cchain,
    ResourceKind::Dsp,
];

/// Brute-force search-space ceiling.
const BRUTE_FORCE_LIMIT: u128 = 100_000_000;

/// Per-block predicted resource cost at one configuration point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostTable {
    costs: BTreeMap<BlockKind, ResourceVector>,
}

impl CostTable {
    pub fn get(&self, kind: BlockKind) -> Option<&ResourceVector> {
        self.costs.get(&kind)
    }

    pub fn insert(&mut self, kind: BlockKind, cost: ResourceVector) {
        self.costs.insert(kind, cost);
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockKind> + '_ {
        self.costs.keys().copied()
    }
}

/// Fills a cost table from fitted models: llut/mlut/ff (and cchain where
/// modeled) via prediction, dsp straight from the block descriptor. A missing
/// CChain model means 0.
pub fn build_cost_table(
    models: &ModelSet,
    cfg: ConfigPoint,
    allowed: &[BlockKind],
) -> Result<CostTable> {
    let mut table = CostTable::default();
    for &block in allowed {
        let mut cost = ResourceVector::default();
        for resource in [ResourceKind::Llut, ResourceKind::Mlut, ResourceKind::Ff] {
            let model = models
                .get(block, resource)
                .ok_or(Error::MissingModel { block, resource })?;
            cost.set(resource, predict(model, cfg));
        }
        cost.cchain = match models.get(block, ResourceKind::Cchain) {
            Some(model) => predict(model, cfg),
            None => 0.0,
        };
        cost.dsp = descriptor(block).dsp_per_block as f64;
        table.insert(block, cost);
    }
    Ok(table)
}

/// Total convolutions per cycle of an instance mix.
fn total_convs(counts: &[u64; 4]) -> u64 {
    BlockKind::ALL
        .iter()
        .zip(counts)
        .map(|(&k, &n)| n * descriptor(k).convs_per_cycle as u64)
        .sum()
}

/// Predicted utilization percentages and total convolutions for an instance
/// mix, indexed Conv1..Conv4.
pub fn predict_usage(
    counts: &[u64; 4],
    costs: &CostTable,
    platform: &PlatformCapacity,
) -> Result<(ResourceVector, u64)> {
    let mut demand = ResourceVector::default();
    for (&kind, &n) in BlockKind::ALL.iter().zip(counts) {
        if n == 0 {
            continue;
        }
        let cost = costs.get(kind).ok_or(Error::MissingModel {
            block: kind,
            resource: ResourceKind::Llut,
        })?;
        for r in ResourceKind::ALL {
            demand.set(r, demand.get(r) + n as f64 * cost.get(r));
        }
    }
    let mut usage = ResourceVector::default();
    for r in ResourceKind::ALL {
        let total = platform.totals.get(r);
        if total == 0.0 {
            // capacity tables may omit MLUT; its percentage is then
            // unreportable and stays 0 rather than poisoning the call
            if demand.get(r) > 0.0 && r != ResourceKind::Mlut {
                return Err(Error::ZeroCapacity { resource: r });
            }
            continue;
        }
        usage.set(r, 100.0 * demand.get(r) / total);
    }
    Ok((usage, total_convs(counts)))
}

/// An allocation problem: maximize convolutions per cycle over non-negative
/// integer instance counts subject to per-resource budget fractions.
#[derive(Debug, Clone)]
pub struct AllocationRequest {
    pub platform: PlatformCapacity,
    pub cfg: ConfigPoint,
    /// Budget fraction per resource, each in (0, 1].
    pub budgets: ResourceVector,
    pub allowed: Vec<BlockKind>,
    pub costs: CostTable,
    /// Also constrain MLUT (off by default: capacity tables rarely track it).
    pub include_mlut: bool,
}

impl AllocationRequest {
    pub fn new(
        platform: PlatformCapacity,
        cfg: ConfigPoint,
        allowed: Vec<BlockKind>,
        costs: CostTable,
    ) -> Self {
        AllocationRequest {
            platform,
            cfg,
            budgets: ResourceVector::splat(0.8),
            allowed,
            costs,
            include_mlut: false,
        }
    }

    fn constrained_resources(&self) -> Vec<ResourceKind> {
        let mut out = DEFAULT_CONSTRAINED.to_vec();
        if self.include_mlut {
            out.push(ResourceKind::Mlut);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    /// Instance counts, indexed Conv1..Conv4.
    pub counts: [u64; 4],
    pub usage_percent: ResourceVector,
    pub total_convs: u64,
}

struct Problem {
    /// blocks in solver order
    blocks: Vec<BlockKind>,
    /// cost per block per constrained resource, [block][resource]
    costs: Vec<Vec<f64>>,
    convs: Vec<u64>,
    limits: Vec<f64>,
}

const FEASIBILITY_EPS: f64 = 1e-9;

impl Problem {
    fn build(req: &AllocationRequest, order_by_density: bool) -> Result<Self> {
        let resources = req.constrained_resources();
        let mut limits = Vec::with_capacity(resources.len());
        for &r in &resources {
            limits.push(req.budgets.get(r) * req.platform.totals.get(r));
        }
        let mut blocks: Vec<BlockKind> = req.allowed.clone();
        blocks.sort();
        blocks.dedup();
        let mut costs = Vec::with_capacity(blocks.len());
        let mut convs = Vec::with_capacity(blocks.len());
        for &b in &blocks {
            let cost = req.costs.get(b).ok_or(Error::MissingModel {
                block: b,
                resource: ResourceKind::Llut,
            })?;
            for (&r, &limit) in resources.iter().zip(&limits) {
                if limit == 0.0 && cost.get(r) > 0.0 {
                    return Err(Error::ZeroCapacity { resource: r });
                }
            }
            costs.push(resources.iter().map(|&r| cost.get(r)).collect());
            convs.push(descriptor(b).convs_per_cycle as u64);
        }
        let mut problem = Problem {
            blocks,
            costs,
            convs,
            limits,
        };
        if order_by_density {
            // convolutions per unit of the dominant (most limiting) resource
            let mut order: Vec<usize> = (0..problem.blocks.len()).collect();
            let density = |i: usize| -> f64 {
                let dominant = problem.costs[i]
                    .iter()
                    .zip(&problem.limits)
                    .filter(|(_, &l)| l > 0.0)
                    .map(|(&c, &l)| c / l)
                    .fold(0.0f64, f64::max);
                if dominant <= 0.0 {
                    f64::INFINITY
                } else {
                    problem.convs[i] as f64 / dominant
                }
            };
            order.sort_by(|&a, &b| density(b).partial_cmp(&density(a)).unwrap());
            problem.blocks = order.iter().map(|&i| problem.blocks[i]).collect();
            problem.costs = order.iter().map(|&i| problem.costs[i].clone()).collect();
            problem.convs = order.iter().map(|&i| problem.convs[i]).collect();
        }
        Ok(problem)
    }

    /// Largest count of block `i` fitting in `remaining`.
    fn max_count(&self, i: usize, remaining: &[f64]) -> u64 {
        let mut ub = f64::INFINITY;
        for (&cost, &rem) in self.costs[i].iter().zip(remaining) {
            if cost > 0.0 {
                ub = ub.min(rem / cost);
            }
        }
        if ub.is_infinite() {
            // a block consuming nothing that is constrained; cap at the
            // largest count any single resource of the device could number
            return u64::MAX >> 1;
        }
        (ub + FEASIBILITY_EPS).floor().max(0.0) as u64
    }

    /// Single-constraint rational relaxation: an upper bound on the
    /// convolutions attainable from blocks `from..` within `remaining`.
    fn relaxation_bound(&self, from: usize, remaining: &[f64]) -> f64 {
        if from >= self.blocks.len() {
            return 0.0;
        }
        let mut bound = f64::INFINITY;
        for (r, &rem) in remaining.iter().enumerate() {
            let mut best_ratio = 0.0f64;
            let mut unconstrained = false;
            for i in from..self.blocks.len() {
                let cost = self.costs[i][r];
                if cost > 0.0 {
                    best_ratio = best_ratio.max(self.convs[i] as f64 / cost);
                } else {
                    unconstrained = true;
                }
            }
            if unconstrained {
                continue; // this resource cannot bound every block
            }
            bound = bound.min(rem.max(0.0) * best_ratio);
        }
        bound
    }

    fn counts_in_block_order(&self, solver_counts: &[u64]) -> [u64; 4] {
        let mut out = [0u64; 4];
        for (&b, &n) in self.blocks.iter().zip(solver_counts) {
            out[b.index()] = n;
        }
        out
    }
}

/// true when `a` beats `b` under the tie-break: larger (n1, n2, n3, n4)
/// lexicographically.
fn lex_better(a: &[u64; 4], b: &[u64; 4]) -> bool {
    a > b
}

struct BestPlan {
    convs: u64,
    counts: [u64; 4],
}

fn branch(
    problem: &Problem,
    level: usize,
    remaining: &mut Vec<f64>,
    counts: &mut Vec<u64>,
    convs: u64,
    best: &mut BestPlan,
) {
    if level == problem.blocks.len() {
        let ordered = problem.counts_in_block_order(counts);
        if convs > best.convs || (convs == best.convs && lex_better(&ordered, &best.counts)) {
            best.convs = convs;
            best.counts = ordered;
        }
        return;
    }
    let ub = problem.max_count(level, remaining);
    let per_conv = problem.convs[level];
    for n in (0..=ub).rev() {
        let gained = convs + n * per_conv;
        let snapshot = remaining.clone();
        for (rem, &cost) in remaining.iter_mut().zip(&problem.costs[level]) {
            *rem -= n as f64 * cost;
        }
        let bound = gained as f64 + problem.relaxation_bound(level + 1, remaining);
        // prune branches that cannot reach the incumbent; equal-bound
        // branches are still explored to settle the lexicographic tie-break
        if (bound + FEASIBILITY_EPS).floor() as u64 >= best.convs {
            counts.push(n);
            branch(problem, level + 1, remaining, counts, gained, best);
            counts.pop();
        }
        *remaining = snapshot;
    }
}

/// Exact branch-and-bound over block counts, ordered by convolution density,
/// bounded by the single-constraint rational relaxation. Deterministic; ties
/// between optimal plans break toward the lexicographically largest
/// (n1, n2, n3, n4).
pub fn allocate_optimal(req: &AllocationRequest) -> Result<AllocationPlan> {
    let problem = Problem::build(req, true)?;
    let mut best = BestPlan {
        convs: 0,
        counts: [0; 4],
    };
    let mut remaining = problem.limits.clone();
    branch(&problem, 0, &mut remaining, &mut Vec::new(), 0, &mut best);
    finish_plan(req, best)
}

/// Exhaustive enumeration oracle; refuses search spaces past 10^8 states.
pub fn allocate_bruteforce(req: &AllocationRequest) -> Result<AllocationPlan> {
    let problem = Problem::build(req, false)?;
    let mut states: u128 = 1;
    for i in 0..problem.blocks.len() {
        states = states.saturating_mul(problem.max_count(i, &problem.limits) as u128 + 1);
    }
    if states > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            states,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    fn enumerate(
        problem: &Problem,
        level: usize,
        remaining: &mut Vec<f64>,
        counts: &mut Vec<u64>,
        convs: u64,
        best: &mut BestPlan,
    ) {
        if level == problem.blocks.len() {
            let ordered = problem.counts_in_block_order(counts);
            if convs > best.convs || (convs == best.convs && lex_better(&ordered, &best.counts)) {
                best.convs = convs;
                best.counts = ordered;
            }
            return;
        }
        let ub = problem.max_count(level, remaining);
        for n in (0..=ub).rev() {
            let snapshot = remaining.clone();
            for (rem, &cost) in remaining.iter_mut().zip(&problem.costs[level]) {
                *rem -= n as f64 * cost;
            }
            counts.push(n);
            enumerate(
                problem,
                level + 1,
                remaining,
                counts,
                convs + n * problem.convs[level],
                best,
            );
            counts.pop();
            *remaining = snapshot;
        }
    }

    let mut best = BestPlan {
        convs: 0,
        counts: [0; 4],
    };
    let mut remaining = problem.limits.clone();
    enumerate(&problem, 0, &mut remaining, &mut Vec::new(), 0, &mut best);
    finish_plan(req, best)
}

fn finish_plan(req: &AllocationRequest, best: BestPlan) -> Result<AllocationPlan> {
    // the zero plan needs no cost entries, so tolerate missing blocks there
    let (usage_percent, total) = if best.counts.iter().all(|&n| n == 0) {
        (ResourceVector::default(), 0)
    } else {
        predict_usage(&best.counts, &req.costs, &req.platform)?
    };
    debug_assert_eq!(total, best.convs);
    Ok(AllocationPlan {
        counts: best.counts,
        usage_percent,
        total_convs: best.convs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::oracle_cost;
    use approx::assert_abs_diff_eq;

    /// Cost table straight from the oracle at (8, 8); model-fitted tables
    /// reproduce these values exactly on noise-free data.
    fn oracle_costs_8x8(allowed: &[BlockKind]) -> CostTable {
        let mut table = CostTable::default();
        for &b in allowed {
            table.insert(b, oracle_cost(b, ConfigPoint::new(8, 8)).unwrap());
        }
        table
    }

    fn request(allowed: &[BlockKind]) -> AllocationRequest {
        AllocationRequest::new(
            PlatformCapacity::zcu104(),
            ConfigPoint::new(8, 8),
            allowed.to_vec(),
            oracle_costs_8x8(allowed),
        )
    }

    #[test]
    fn usage_single_block_rows() {
        let costs = oracle_costs_8x8(&BlockKind::ALL);
        let zcu104 = PlatformCapacity::zcu104();
        let (usage, convs) = predict_usage(&[0, 1382, 0, 0], &costs, &zcu104).unwrap();
        assert_abs_diff_eq!(usage.dsp, 79.98, epsilon = 0.01);
        assert_abs_diff_eq!(usage.llut, 14.90, epsilon = 0.01);
        assert_abs_diff_eq!(usage.ff, 6.40, epsilon = 0.01);
        assert_eq!(convs, 1382);

        let (usage, convs) = predict_usage(&[0, 0, 0, 691], &costs, &zcu104).unwrap();
        assert_abs_diff_eq!(usage.dsp, 79.98, epsilon = 0.01);
        assert_abs_diff_eq!(usage.llut, 11.16, epsilon = 0.01);
        assert_eq!(convs, 1382);

        let (usage, convs) = predict_usage(&[0, 0, 0, 0], &costs, &zcu104).unwrap();
        assert_eq!(usage, ResourceVector::default());
        assert_eq!(convs, 0);
    }

    #[test]
    fn usage_is_linear_in_counts() {
        let costs = oracle_costs_8x8(&BlockKind::ALL);
        let zcu104 = PlatformCapacity::zcu104();
        let a = [100, 20, 30, 5];
        let b = [7, 0, 400, 60];
        let sum = [107, 20, 430, 65];
        let (ua, ca) = predict_usage(&a, &costs, &zcu104).unwrap();
        let (ub, cb) = predict_usage(&b, &costs, &zcu104).unwrap();
        let (us, cs) = predict_usage(&sum, &costs, &zcu104).unwrap();
        assert_eq!(ca + cb, cs);
        for r in ResourceKind::ALL {
            assert_abs_diff_eq!(ua.get(r) + ub.get(r), us.get(r), epsilon = 1e-9);
        }
    }

    #[test]
    fn usage_zero_capacity_error() {
        let costs = oracle_costs_8x8(&BlockKind::ALL);
        let tiny = PlatformCapacity {
            platform_id: "degenerate".to_string(),
            totals: ResourceVector::new(1000.0, 0.0, 0.0, 100.0, 10.0),
        };
        assert!(matches!(
            predict_usage(&[1, 0, 0, 0], &costs, &tiny),
            Err(Error::ZeroCapacity {
                resource: ResourceKind::Ff
            })
        ));
    }

    #[test]
    fn cost_table_requires_models() {
        let models = ModelSet::new();
        assert!(matches!(
            build_cost_table(&models, ConfigPoint::new(8, 8), &[BlockKind::Conv2]),
            Err(Error::MissingModel {
                block: BlockKind::Conv2,
                ..
            })
        ));
    }

    #[test]
    fn single_block_allocation_is_a_floor() {
        // Conv4 only: DSP-bound at floor(0.8 * 1728 / 2) = 691
        let plan = allocate_optimal(&request(&[BlockKind::Conv4])).unwrap();
        assert_eq!(plan.counts, [0, 0, 0, 691]);
        assert_eq!(plan.total_convs, 1382);
        assert_abs_diff_eq!(plan.usage_percent.dsp, 79.98, epsilon = 0.01);

        let brute = allocate_bruteforce(&request(&[BlockKind::Conv4])).unwrap();
        assert_eq!(brute.counts, plan.counts);
    }

    #[test]
    fn empty_allowed_set_yields_zero_plan() {
        let plan = allocate_optimal(&request(&[])).unwrap();
        assert_eq!(plan.counts, [0, 0, 0, 0]);
        assert_eq!(plan.total_convs, 0);
    }

    #[test]
    fn plans_respect_budgets() {
        for allowed in [
            vec![BlockKind::Conv1],
            vec![BlockKind::Conv3],
            BlockKind::ALL.to_vec(),
        ] {
            let req = request(&allowed);
            let plan = allocate_optimal(&req).unwrap();
            for r in [
                ResourceKind::Llut,
                ResourceKind::Ff,
                ResourceKind::Cchain,
                ResourceKind::Dsp,
            ] {
                assert!(
                    plan.usage_percent.get(r) <= 100.0 * req.budgets.get(r) + 1e-9,
                    "{r} over budget: {}",
                    plan.usage_percent.get(r)
                );
            }
        }
    }

    #[test]
    fn enlarging_allowed_set_never_hurts() {
        let subsets: [&[BlockKind]; 4] = [
            &[BlockKind::Conv3],
            &[BlockKind::Conv3, BlockKind::Conv1],
            &[BlockKind::Conv3, BlockKind::Conv1, BlockKind::Conv4],
            &BlockKind::ALL,
        ];
        let mut last = 0;
        for allowed in subsets {
            let plan = allocate_optimal(&request(allowed)).unwrap();
            assert!(plan.total_convs >= last);
            last = plan.total_convs;
        }
    }

    #[test]
    fn bruteforce_rejects_huge_spaces() {
        assert!(matches!(
            allocate_bruteforce(&request(&BlockKind::ALL)),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn optimal_matches_bruteforce_on_scaled_instances() {
        // the full randomized sweep lives in the acceptance suite
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..50 {
            let mut costs = CostTable::default();
            for kind in BlockKind::ALL {
                costs.insert(
                    kind,
                    ResourceVector::new(
                        rng.random_range(1.0..50.0),
                        0.0,
                        rng.random_range(0.0..40.0),
                        if kind == BlockKind::Conv1 {
                            rng.random_range(0.0..10.0)
                        } else {
                            0.0
                        },
                        descriptor(kind).dsp_per_block as f64,
                    ),
                );
            }
            let platform = PlatformCapacity {
                platform_id: "scaled".to_string(),
                totals: ResourceVector::new(
                    rng.random_range(100.0..600.0),
                    0.0,
                    rng.random_range(100.0..600.0),
                    rng.random_range(20.0..100.0),
                    rng.random_range(4.0..40.0),
                ),
            };
            let req = AllocationRequest::new(
                platform,
                ConfigPoint::new(8, 8),
                BlockKind::ALL.to_vec(),
                costs,
            );
            let fast = allocate_optimal(&req).unwrap();
            let brute = allocate_bruteforce(&req).unwrap();
            assert_eq!(fast.total_convs, brute.total_convs);
            assert_eq!(fast.counts, brute.counts, "tie-break mismatch");
        }
    }
}
