//! Experiments and certificates around the payment rules: Monte-Carlo
//! estimation of the least-core bound, group manipulation, unilateral
//! deviation bounds and the infeasibility of budget-balanced Groves pivots.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{clear_tables, coalitional_value};
use crate::bids::{
    merge_bids, sample_valuation_profile, AllocationGrid, BidProfile, BidTable, CoefficientRanges,
    SAMPLER_NAME,
};
use crate::coalition::{least_core_epsilon, LeastCoreOptions, MarketGame};
use crate::error::{Error, Result};
use crate::network::{AreaId, AreaSet, Link, NetworkGraph};
use crate::payments::{mlc_report, vcg_report, Mechanism, PaymentReport};
use crate::TOL;

/// Quantile levels reported next to the sample maximum.
pub const EPSILON_QUANTILES: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBarEstimate {
    pub samples: usize,
    pub seed: u64,
    pub generator: String,
    pub ranges: CoefficientRanges,
    /// The estimate: largest sampled epsilon*.
    pub max: f64,
    /// Seed of the sample attaining the maximum.
    pub argmax_seed: u64,
    pub mean: f64,
    /// `(level, value)` pairs, nearest-rank.
    pub quantiles: Vec<(f64, f64)>,
}

/// Samples `n` valuation profiles (sample `i` uses seed `seed + i`) and
/// records the distribution of epsilon*. Deterministic in `(seed, n)`.
pub fn estimate_epsilon_bar(
    network: &NetworkGraph,
    grid: &AllocationGrid,
    ranges: &CoefficientRanges,
    n: usize,
    seed: u64,
    opts: &LeastCoreOptions,
) -> Result<EpsilonBarEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let eps: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let p = sample_valuation_profile(network, grid, ranges, s)?;
            let game = MarketGame::new(&p, network, grid)?;
            Ok(least_core_epsilon(&game, opts)?.epsilon_star)
        })
        .collect::<Result<_>>()?;
    let (argmax, max) = eps
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    let mut sorted = eps.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = EPSILON_QUANTILES
        .iter()
        .map(|&q| {
            let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
            (q, sorted[rank - 1])
        })
        .collect();
    Ok(EpsilonBarEstimate {
        samples: n,
        seed,
        generator: SAMPLER_NAME.to_string(),
        ranges: *ranges,
        max,
        argmax_seed: seed.wrapping_add(argmax as u64),
        mean: eps.iter().sum::<f64>() / n as f64,
        quantiles,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipulationOutcome {
    pub mechanism: Mechanism,
    /// Total true utility of the coalition under truthful bids.
    pub truthful_total: f64,
    /// Total true utility of the coalition under the manipulated bids.
    pub manipulated_total: f64,
    pub truthful: PaymentReport,
    pub manipulated: PaymentReport,
}

impl ManipulationOutcome {
    pub fn gain(&self) -> f64 {
        self.manipulated_total - self.truthful_total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipulationReport {
    pub coalition: Vec<AreaId>,
    pub strategy: String,
    pub outcomes: Vec<ManipulationOutcome>,
    /// VCG utility of the coalition participating as one merged area under
    /// truthful bids, `V - V(A \ S)`.
    pub merged_vcg_utility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_bar: Option<f64>,
    /// `merged_vcg_utility + eps_bar`: the most the coalition can reach
    /// under a least-core-selecting rule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl ManipulationReport {
    pub fn outcome(&self, mechanism: Mechanism) -> Option<&ManipulationOutcome> {
        self.outcomes.iter().find(|o| o.mechanism == mechanism)
    }
}

/// Runs VCG and MLC with truthful bids and with the members of `s` bidding
/// `transform(v_a)`; utilities are evaluated with the true valuations.
#[allow(clippy::too_many_arguments)]
pub fn group_manipulation_experiment(
    truth: &BidProfile,
    s: AreaSet,
    strategy: &str,
    transform: impl Fn(&BidTable) -> BidTable,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    eps_bar: Option<f64>,
    opts: &LeastCoreOptions,
) -> Result<ManipulationReport> {
    let n = network.area_count();
    if s.is_empty() || s == network.all_areas() || !s.is_subset(network.all_areas()) {
        return Err(Error::InvalidArgument(
            "manipulating coalition must be a nonempty proper subset".into(),
        ));
    }
    let mut bids = truth.clone();
    for a in s.iter() {
        bids.insert(transform(truth.require(network.area(a))?));
    }
    let truthful_game = MarketGame::new(truth, network, grid)?;
    let manipulated_game = MarketGame::new(&bids, network, grid)?;
    let total = |r: &PaymentReport| -> f64 {
        s.iter()
            .map(|a| r.areas[a].true_utility.unwrap_or(f64::NAN))
            .sum()
    };
    let mut outcomes = Vec::new();
    for mechanism in [Mechanism::Vcg, Mechanism::Mlc] {
        let run = |game: &MarketGame<'_>| -> Result<PaymentReport> {
            match mechanism {
                Mechanism::Vcg => vcg_report(game),
                _ => mlc_report(game, opts),
            }?
            .with_true_valuations(truth, network)
        };
        let truthful = run(&truthful_game)?;
        let manipulated = run(&manipulated_game)?;
        outcomes.push(ManipulationOutcome {
            mechanism,
            truthful_total: total(&truthful),
            manipulated_total: total(&manipulated),
            truthful,
            manipulated,
        });
    }

    // The coalition as a single area: merged bid, cleared against the rest.
    let merged = merge_bids(truth, s, network, grid)?;
    let rest = s.complement(n);
    let mut tables: Vec<&BidTable> = rest
        .iter()
        .map(|a| truth.require(network.area(a)))
        .collect::<Result<_>>()?;
    tables.push(&merged.table);
    let free = network.internal_links(s).complement(network.link_count());
    let with_merged = clear_tables(&tables, free, network, grid)?.value;
    let without = coalitional_value(truth, rest, network, grid)?.value;
    let merged_vcg_utility = merged.offset + with_merged - without;

    Ok(ManipulationReport {
        coalition: network.area_names(s).into_iter().cloned().collect(),
        strategy: strategy.to_string(),
        outcomes,
        merged_vcg_utility,
        eps_bar,
        bound: eps_bar.map(|e| merged_vcg_utility + e),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    pub area: AreaId,
    pub mechanism: Mechanism,
    pub eps_bar: f64,
    /// VCG utility of the area bidding truthfully against the others.
    pub vcg_utility: f64,
    /// The area's utility under `mechanism` when bidding truthfully.
    pub mechanism_utility: f64,
    /// `eps_bar + vcg_utility - mechanism_utility`.
    pub bound: f64,
}

fn run_mechanism(
    mechanism: Mechanism,
    game: &MarketGame<'_>,
    opts: &LeastCoreOptions,
) -> Result<PaymentReport> {
    match mechanism {
        Mechanism::Vcg => vcg_report(game),
        Mechanism::Mlc => mlc_report(game, opts),
        other => Err(Error::InvalidArgument(format!(
            "deviation analysis supports VCG and MLC, not {}",
            other.label()
        ))),
    }
}

fn with_truthful(area: &AreaId, truth: &BidProfile, others: &BidProfile) -> Result<BidProfile> {
    let mut p = others.clone();
    p.insert(truth.require(area)?.clone());
    Ok(p)
}

/// Largest gain area `a` can obtain by deviating from truthful bidding when
/// the others bid `others`, for a mechanism charging at most `eps_bar` less
/// than VCG.
#[allow(clippy::too_many_arguments)]
pub fn unilateral_deviation_bound(
    truth: &BidProfile,
    area: &str,
    others: &BidProfile,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    mechanism: Mechanism,
    eps_bar: f64,
    opts: &LeastCoreOptions,
) -> Result<DeviationBound> {
    let a = network
        .area_index(area)
        .ok_or_else(|| Error::UnknownArea(area.to_string()))?;
    let id = network.area(a).clone();
    let profile = with_truthful(&id, truth, others)?;
    let game = MarketGame::new(&profile, network, grid)?;
    let vcg_utility = vcg_report(&game)?.areas[a].revealed_utility;
    let mechanism_utility = run_mechanism(mechanism, &game, opts)?.areas[a].revealed_utility;
    Ok(DeviationBound {
        area: id,
        mechanism,
        eps_bar,
        vcg_utility,
        mechanism_utility,
        bound: eps_bar + vcg_utility - mechanism_utility,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCheck {
    pub bound: DeviationBound,
    pub samples: usize,
    /// Largest true-utility gain over the sampled deviations.
    pub max_gain: f64,
    /// Deviations whose gain exceeds the bound by more than the tolerance.
    pub violations: usize,
}

/// Scaled tables with optional per-entry uniform noise. The default entry
/// stays at 0.
pub fn sample_deviation(table: &BidTable, rng: &mut impl Rng) -> BidTable {
    const FACTORS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
    let k = if rng.gen_bool(0.5) {
        FACTORS[rng.gen_range(0..FACTORS.len())]
    } else {
        rng.gen_range(0.0..=5.0)
    };
    let scaled = table.scaled(k);
    if rng.gen_bool(0.5) {
        let spread = 0.5 * scaled.values().map(f64::abs).fold(0.0, f64::max) + 0.05;
        scaled.map_values(|_, v| v + rng.gen_range(-spread..=spread))
    } else {
        scaled
    }
}

/// Samples deviations of `area` and compares each gain with the bound. When
/// `eps_bar` is `None`, the largest epsilon* among the truthful and deviated
/// profiles is used.
#[allow(clippy::too_many_arguments)]
pub fn check_unilateral_deviations(
    truth: &BidProfile,
    area: &str,
    others: &BidProfile,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    mechanism: Mechanism,
    eps_bar: Option<f64>,
    samples: usize,
    seed: u64,
    opts: &LeastCoreOptions,
) -> Result<DeviationCheck> {
    let a = network
        .area_index(area)
        .ok_or_else(|| Error::UnknownArea(area.to_string()))?;
    let id = network.area(a).clone();
    let true_table = truth.require(&id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gains = Vec::with_capacity(samples);
    let mut observed_eps: f64 = 0.0;
    let truthful_profile = with_truthful(&id, truth, others)?;
    // Only `area`'s true utility is needed; the others' bids may leave the
    // domain of their true valuations.
    let true_utility = |r: &PaymentReport| -> Result<f64> {
        let x: Vec<f64> = network.incident_links_of(a).iter().map(|e| r.allocation[e]).collect();
        Ok(true_table.evaluate(&x)? - r.areas[a].payment)
    };
    let truthful_report = run_mechanism(mechanism, &MarketGame::new(&truthful_profile, network, grid)?, opts)?;
    observed_eps = observed_eps.max(truthful_report.epsilon_star.unwrap_or(0.0));
    let truthful_utility = true_utility(&truthful_report)?;
    for _ in 0..samples {
        let mut p = others.clone();
        p.insert(sample_deviation(true_table, &mut rng));
        let report = run_mechanism(mechanism, &MarketGame::new(&p, network, grid)?, opts)?;
        observed_eps = observed_eps.max(report.epsilon_star.unwrap_or(0.0));
        gains.push(true_utility(&report)? - truthful_utility);
    }
    let eps_bar = match (mechanism, eps_bar) {
        (_, Some(e)) => e,
        (Mechanism::Vcg, None) => 0.0,
        (_, None) => observed_eps,
    };
    let bound = unilateral_deviation_bound(truth, area, others, network, grid, mechanism, eps_bar, opts)?;
    let violations = gains.iter().filter(|g| **g > bound.bound + TOL).count();
    Ok(DeviationCheck {
        bound,
        samples,
        max_gain: gains.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        violations,
    })
}

/// Linear system for budget-balanced Groves pivots and its rank certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrovesCertificate {
    /// Unknown pivot values, in column order.
    pub unknowns: Vec<String>,
    /// Strategy pair `(i, j)` of each row.
    pub rows: Vec<(usize, usize)>,
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub rank: usize,
    pub augmented_rank: usize,
    /// `min_h |A h - b|`.
    pub residual: f64,
    pub least_squares: Vec<f64>,
}

impl GrovesCertificate {
    /// True when no pivot functions achieve strong budget balance.
    pub fn is_infeasible(&self) -> bool {
        self.augmented_rank > self.rank
    }
}

/// Two areas on one link with grid `{0, 1}`, each with two strategies given
/// by their value at 1. Strong budget balance of Groves payments for every
/// strategy pair `(i, j)` requires `h_1(b_2^j) + h_2(b_1^i) = V(b_1^i, b_2^j)`;
/// the certificate reports the ranks of that system.
pub fn groves_budget_system(a1_strategies: [f64; 2], a2_strategies: [f64; 2]) -> Result<GrovesCertificate> {
    let network = NetworkGraph::new(vec!["a1".into(), "a2".into()], vec![Link::new("e", "a1", "a2")])?;
    let grid = AllocationGrid::uniform(1, vec![0.0, 1.0], 0.0)?;
    let table = |area: &str, at_one: f64| {
        BidTable::from_entries(area, &network, &grid, &[(vec![0.0], 0.0), (vec![1.0], at_one)])
    };
    let b1 = a1_strategies.map(|v| table("a1", v));
    let b2 = a2_strategies.map(|v| table("a2", v));
    let unknowns = vec![
        "h_a1(b_a2^1)".to_string(),
        "h_a1(b_a2^2)".to_string(),
        "h_a2(b_a1^1)".to_string(),
        "h_a2(b_a1^2)".to_string(),
    ];
    let rows = vec![(1, 2), (1, 1), (2, 1), (2, 2)];
    let mut matrix = Vec::new();
    let mut rhs = Vec::new();
    for &(i, j) in &rows {
        let (t1, t2) = (b1[i - 1].clone()?, b2[j - 1].clone()?);
        let profile = BidProfile::from_tables([t1, t2]);
        let r = crate::allocation::clear_market(&profile, &network, &grid)?;
        let v1 = r.area_value("a1").unwrap_or(0.0);
        let v2 = r.area_value("a2").unwrap_or(0.0);
        // t_a1 + t_a2 = 0 with t_a = h_a - sum_{j != a} b_j(chi*)
        rhs.push(2.0 * r.value - v1 - v2);
        let mut row = vec![0.0; 4];
        row[j - 1] = 1.0;
        row[2 + i - 1] = 1.0;
        matrix.push(row);
    }
    let a = DMatrix::from_fn(4, 4, |r, c| matrix[r][c]);
    let b = DVector::from_vec(rhs.clone());
    let mut aug = DMatrix::zeros(4, 5);
    aug.view_mut((0, 0), (4, 4)).copy_from(&a);
    aug.set_column(4, &b);
    const RANK_TOL: f64 = 1e-9;
    let rank = a.clone().svd(false, false).rank(RANK_TOL);
    let augmented_rank = aug.svd(false, false).rank(RANK_TOL);
    let h = a
        .clone()
        .svd(true, true)
        .solve(&b, RANK_TOL)
        .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
    let residual = (&a * &h - &b).norm();
    Ok(GrovesCertificate {
        unknowns,
        rows,
        matrix,
        rhs,
        rank,
        augmented_rank,
        residual,
        least_squares: h.iter().copied().collect(),
    })
}

/// The instance `b_a1 in {1, 0}`, `b_a2 in {-1, 0}` at allocation 1.
pub fn groves_budget_infeasibility() -> Result<GrovesCertificate> {
    groves_budget_system([1.0, 0.0], [-1.0, 0.0])
}
