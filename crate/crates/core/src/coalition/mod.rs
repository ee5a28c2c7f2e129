//! Coalitional stability: epsilon-core membership, the least core, and the
//! min-max least-core (MLC) utilities.
//!
//! Both programs are solved by constraint generation. The working set starts
//! with the singleton constraints and the budget equality; each round the
//! separation oracle enumerates all proper coalitions (values are memoized)
//! and the most violated one is added until nothing is violated by more than
//! the tolerance.

pub mod lp;

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{clear_market, coalitional_value, ClearingResult};
use crate::bids::{AllocationGrid, BidProfile};
use crate::error::{Error, Result};
use crate::network::{AreaId, AreaSet, NetworkGraph};
use crate::TOL;
use lp::{solve_lp, Direction, LinearProgram, LpError, LpOutcome, Sense};

/// Default limit on the number of areas for which coalitions are enumerated.
pub const DEFAULT_MAX_ENUMERATION_AREAS: usize = 12;

/// Characteristic function over the areas of a network.
pub trait CoalitionalGame: Sync {
    fn players(&self) -> &[AreaId];

    /// `V(B_S)`; must be 0 on the empty set.
    fn value(&self, s: AreaSet) -> Result<f64>;

    fn player_count(&self) -> usize {
        self.players().len()
    }

    fn grand_value(&self) -> Result<f64> {
        self.value(AreaSet::full(self.player_count()))
    }

    /// `V - V(A \ {a})` for every area: utilities under the Clarke pivot.
    fn vcg_utilities(&self) -> Result<PayoffVector> {
        let n = self.player_count();
        let full = AreaSet::full(n);
        let v = self.grand_value()?;
        let values = (0..n)
            .map(|a| Ok(v - self.value(full.without(a))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(PayoffVector::from_parts(self.players().to_vec(), values))
    }
}

/// The market game of a bid profile. Coalition values are computed by grid
/// enumeration on first use and cached.
pub struct MarketGame<'a> {
    profile: &'a BidProfile,
    network: &'a NetworkGraph,
    grid: &'a AllocationGrid,
    cache: Mutex<HashMap<AreaSet, f64>>,
    clearing: ClearingResult,
}

impl<'a> MarketGame<'a> {
    pub fn new(
        profile: &'a BidProfile,
        network: &'a NetworkGraph,
        grid: &'a AllocationGrid,
    ) -> Result<Self> {
        profile.check(network, grid)?;
        profile.check_complete(network)?;
        let clearing = clear_market(profile, network, grid)?;
        let mut cache = HashMap::new();
        cache.insert(network.all_areas(), clearing.value);
        cache.insert(AreaSet::EMPTY, 0.0);
        Ok(Self {
            profile,
            network,
            grid,
            cache: Mutex::new(cache),
            clearing,
        })
    }

    pub fn clearing(&self) -> &ClearingResult {
        &self.clearing
    }

    pub fn network(&self) -> &NetworkGraph {
        self.network
    }

    pub fn profile(&self) -> &BidProfile {
        self.profile
    }

    pub fn grid(&self) -> &AllocationGrid {
        self.grid
    }

    /// Fills the cache for every coalition in parallel.
    pub fn precompute(&self) -> Result<()> {
        let n = self.player_count();
        check_enumerable(n, DEFAULT_MAX_ENUMERATION_AREAS)?;
        let missing: Vec<AreaSet> = {
            let cache = self.cache.lock().expect("cache lock");
            (0..1u64 << n)
                .map(AreaSet::from_bits)
                .filter(|s| !cache.contains_key(s))
                .collect()
        };
        let computed = missing
            .par_iter()
            .map(|&s| Ok((s, self.compute(s)?)))
            .collect::<Result<Vec<_>>>()?;
        self.cache.lock().expect("cache lock").extend(computed);
        Ok(())
    }

    fn compute(&self, s: AreaSet) -> Result<f64> {
        Ok(coalitional_value(self.profile, s, self.network, self.grid)?.value)
    }
}

impl CoalitionalGame for MarketGame<'_> {
    fn players(&self) -> &[AreaId] {
        self.network.areas()
    }

    fn value(&self, s: AreaSet) -> Result<f64> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&s) {
            return Ok(*v);
        }
        let v = self.compute(s)?;
        self.cache.lock().expect("cache lock").insert(s, v);
        Ok(v)
    }
}

/// A game given by an explicit table of `2^n` coalition values indexed by
/// bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct TableGame {
    players: Vec<AreaId>,
    values: Vec<f64>,
}

impl TableGame {
    pub fn new(players: Vec<AreaId>, values: Vec<f64>) -> Result<Self> {
        let n = players.len();
        check_enumerable(n, DEFAULT_MAX_ENUMERATION_AREAS)?;
        if values.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                what: "coalition value table".into(),
                expected: 1 << n,
                got: values.len(),
            });
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument("value of the empty coalition must be 0".into()));
        }
        Ok(Self { players, values })
    }

    /// Tabulates every coalition value of `game`.
    pub fn from_game(game: &impl CoalitionalGame) -> Result<Self> {
        let n = game.player_count();
        check_enumerable(n, DEFAULT_MAX_ENUMERATION_AREAS)?;
        let values = (0..1u64 << n)
            .map(|b| game.value(AreaSet::from_bits(b)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(game.players().to_vec(), values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl CoalitionalGame for TableGame {
    fn players(&self) -> &[AreaId] {
        &self.players
    }

    fn value(&self, s: AreaSet) -> Result<f64> {
        self.values
            .get(s.bits() as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("coalition {:#b} out of range", s.bits())))
    }
}

/// Revealed utility of every area, in canonical area order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffVector {
    areas: Vec<AreaId>,
    values: Vec<f64>,
}

impl PayoffVector {
    pub fn new(areas: Vec<AreaId>, values: Vec<f64>) -> Result<Self> {
        if areas.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "payoff vector".into(),
                expected: areas.len(),
                got: values.len(),
            });
        }
        Ok(Self { areas, values })
    }

    fn from_parts(areas: Vec<AreaId>, values: Vec<f64>) -> Self {
        debug_assert_eq!(areas.len(), values.len());
        Self { areas, values }
    }

    pub fn zeros(areas: &[AreaId]) -> Self {
        Self::from_parts(areas.to_vec(), vec![0.0; areas.len()])
    }

    pub fn areas(&self) -> &[AreaId] {
        &self.areas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, area: &str) -> Option<f64> {
        self.areas
            .iter()
            .position(|a| a.as_str() == area)
            .map(|i| self.values[i])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn coalition_sum(&self, s: AreaSet) -> f64 {
        s.iter().map(|a| self.values[a]).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AreaId, f64)> {
        self.areas.iter().zip(self.values.iter().copied())
    }
}

fn check_enumerable(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::TooManyAreas { n, limit })
    } else {
        Ok(())
    }
}

fn check_payoff(game: &impl CoalitionalGame, u: &PayoffVector) -> Result<()> {
    if u.areas() != game.players() {
        return Err(Error::ProfileMismatch(
            "payoff vector areas differ from the game's areas".into(),
        ));
    }
    Ok(())
}

/// Nonempty proper coalitions in ascending bitmask order.
fn proper_coalitions(n: usize) -> impl Iterator<Item = AreaSet> {
    let full = (1u64 << n) - 1;
    (1..full).map(AreaSet::from_bits)
}

/// Outcome of an epsilon-core membership test.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreCheck {
    pub contained: bool,
    /// `sum(u) - V`.
    pub budget_gap: f64,
    /// Coalitions with `V(S) - eps - u(S) > tol`, with that amount.
    pub violations: Vec<(AreaSet, f64)>,
}

/// Tests `u` against the budget equality and every proper-coalition
/// constraint `u(S) >= V(S) - eps`.
pub fn epsilon_core_contains(
    game: &impl CoalitionalGame,
    u: &PayoffVector,
    eps: f64,
    tol: f64,
) -> Result<CoreCheck> {
    check_payoff(game, u)?;
    let n = game.player_count();
    check_enumerable(n, DEFAULT_MAX_ENUMERATION_AREAS)?;
    let budget_gap = u.total() - game.grand_value()?;
    let mut violations = Vec::new();
    for s in proper_coalitions(n) {
        let v = game.value(s)? - eps - u.coalition_sum(s);
        if v > tol {
            violations.push((s, v));
        }
    }
    Ok(CoreCheck {
        contained: budget_gap.abs() <= tol && violations.is_empty(),
        budget_gap,
        violations,
    })
}

/// Most violated proper coalition for `u` at `eps`, or `None` when no
/// violation exceeds `tol`. Ties go to the smallest bitmask.
pub fn separation_oracle(
    game: &impl CoalitionalGame,
    u: &PayoffVector,
    eps: f64,
    tol: f64,
) -> Result<Option<(AreaSet, f64)>> {
    check_payoff(game, u)?;
    separate(game, u.values(), eps, tol, DEFAULT_MAX_ENUMERATION_AREAS)
}

fn separate(
    game: &impl CoalitionalGame,
    u: &[f64],
    eps: f64,
    tol: f64,
    limit: usize,
) -> Result<Option<(AreaSet, f64)>> {
    let n = game.player_count();
    check_enumerable(n, limit)?;
    let mut best: Option<(AreaSet, f64)> = None;
    for s in proper_coalitions(n) {
        let v = game.value(s)? - eps - s.iter().map(|a| u[a]).sum::<f64>();
        if v > tol && best.is_none_or(|(_, b)| v > b) {
            best = Some((s, v));
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeastCoreMethod {
    ConstraintGeneration,
    FullEnumeration,
}

/// How the MLC program picks among multiple optima.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lexicographic min-max refinement of the gaps `u_a - u_a^VCG`.
    LexMinMax,
    /// The simplex vertex of the min-max program as found.
    Vertex,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeastCoreOptions {
    pub tol: f64,
    pub method: LeastCoreMethod,
    pub max_enumeration_areas: usize,
    pub tie_break: TieBreak,
}

impl Default for LeastCoreOptions {
    fn default() -> Self {
        Self {
            tol: TOL,
            method: LeastCoreMethod::ConstraintGeneration,
            max_enumeration_areas: DEFAULT_MAX_ENUMERATION_AREAS,
            tie_break: TieBreak::LexMinMax,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastCoreResult {
    pub epsilon_star: f64,
    pub witness: PayoffVector,
    /// Proper coalitions whose constraint is tight at the witness.
    pub binding: Vec<AreaSet>,
    /// Separation rounds, counting the final round that finds no violation.
    pub iterations: usize,
    pub method: LeastCoreMethod,
}

/// Working set of coalition constraints shared by the programs below.
struct Cuts {
    sets: Vec<AreaSet>,
}

impl Cuts {
    fn seeded(n: usize, method: LeastCoreMethod) -> Self {
        let sets = match method {
            LeastCoreMethod::ConstraintGeneration => (0..n).map(AreaSet::singleton).collect(),
            LeastCoreMethod::FullEnumeration => proper_coalitions(n).collect(),
        };
        Self { sets }
    }

    fn add(&mut self, s: AreaSet) -> Result<()> {
        if self.sets.contains(&s) {
            // The LP returned a point violating a constraint it already has.
            return Err(LpError::Numerical(format!(
                "coalition {:#b} violated although present",
                s.bits()
            ))
            .into());
        }
        self.sets.push(s);
        Ok(())
    }
}

fn coalition_row(s: AreaSet, width: usize) -> Vec<f64> {
    let mut row = vec![0.0; width];
    for a in s.iter() {
        row[a] = 1.0;
    }
    row
}

fn expect_optimal(outcome: LpOutcome, what: &str) -> Result<lp::LpSolution> {
    match outcome {
        LpOutcome::Optimal(s) => Ok(s),
        LpOutcome::Infeasible => Err(LpError::Numerical(format!("{what} reported infeasible")).into()),
        LpOutcome::Unbounded => Err(LpError::Numerical(format!("{what} reported unbounded")).into()),
    }
}

/// Repeatedly solves `build(cuts)` and adds the most violated coalition at
/// the solution's utilities (first `n` variables) until none is violated.
/// Returns the solution and the number of separation rounds.
fn solve_with_cuts(
    game: &impl CoalitionalGame,
    cuts: &mut Cuts,
    eps_of: impl Fn(&[f64]) -> f64,
    build: impl Fn(&[AreaSet]) -> LinearProgram,
    opts: &LeastCoreOptions,
    what: &str,
) -> Result<(lp::LpSolution, usize)> {
    let n = game.player_count();
    let mut rounds = 0;
    loop {
        let sol = expect_optimal(solve_lp(&build(&cuts.sets))?, what)?;
        rounds += 1;
        let eps = eps_of(&sol.x);
        match separate(game, &sol.x[..n], eps, opts.tol, opts.max_enumeration_areas)? {
            None => return Ok((sol, rounds)),
            Some((s, _)) => cuts.add(s)?,
        }
    }
}

/// Smallest `eps >= 0` for which the epsilon-core is nonempty.
pub fn least_core_epsilon(
    game: &impl CoalitionalGame,
    opts: &LeastCoreOptions,
) -> Result<LeastCoreResult> {
    let n = game.player_count();
    check_enumerable(n, opts.max_enumeration_areas)?;
    let v = game.grand_value()?;
    if n <= 1 {
        return Ok(LeastCoreResult {
            epsilon_star: 0.0,
            witness: PayoffVector::from_parts(game.players().to_vec(), vec![v; n]),
            binding: Vec::new(),
            iterations: 0,
            method: opts.method,
        });
    }
    let values = coalition_values(game, n)?;
    let mut cuts = Cuts::seeded(n, opts.method);
    // Variables: u_0 .. u_{n-1} free, eps >= 0 last.
    let build = |sets: &[AreaSet]| {
        let mut costs = vec![0.0; n + 1];
        costs[n] = 1.0;
        let mut p = LinearProgram::new(Direction::Minimize, costs);
        for a in 0..n {
            p.free(a);
        }
        let mut all = vec![1.0; n + 1];
        all[n] = 0.0;
        p.add(all, Sense::Eq, v);
        for &s in sets {
            let mut row = coalition_row(s, n + 1);
            row[n] = 1.0;
            p.add(row, Sense::Ge, values[s.bits() as usize]);
        }
        p
    };
    let (sol, iterations) =
        solve_with_cuts(game, &mut cuts, |x| x[n], build, opts, "least-core program")?;
    let epsilon_star = sol.x[n].max(0.0);
    let u = sol.x[..n].to_vec();
    let binding = binding_coalitions(&values, &u, epsilon_star, n);
    Ok(LeastCoreResult {
        epsilon_star,
        witness: PayoffVector::from_parts(game.players().to_vec(), u),
        binding,
        iterations,
        method: opts.method,
    })
}

/// All `2^n` coalition values, indexed by bitmask.
fn coalition_values(game: &impl CoalitionalGame, n: usize) -> Result<Vec<f64>> {
    (0..1u64 << n)
        .map(|b| game.value(AreaSet::from_bits(b)))
        .collect()
}

fn binding_coalitions(values: &[f64], u: &[f64], eps: f64, n: usize) -> Vec<AreaSet> {
    proper_coalitions(n)
        .filter(|s| {
            let slack = s.iter().map(|a| u[a]).sum::<f64>() - (values[s.bits() as usize] - eps);
            slack.abs() <= 1e-7
        })
        .collect()
}

/// Output of the min-max least-core program.
#[derive(Clone, Debug, PartialEq)]
pub struct MlcResult {
    pub utilities: PayoffVector,
    pub vcg_utilities: PayoffVector,
    pub least_core: LeastCoreResult,
    /// Optimal value of `max_a (u_a - u_a^VCG)`.
    pub max_gap: f64,
    pub tie_break: TieBreak,
    /// Separation rounds over all programs solved.
    pub iterations: usize,
}

/// Least-core point minimizing the largest gap `u_a - u_a^VCG`.
pub fn minmax_least_core(
    game: &impl CoalitionalGame,
    opts: &LeastCoreOptions,
) -> Result<MlcResult> {
    let least_core = least_core_epsilon(game, opts)?;
    let vcg = game.vcg_utilities()?;
    let n = game.player_count();
    let players = game.players().to_vec();
    if n <= 1 {
        return Ok(MlcResult {
            utilities: least_core.witness.clone(),
            max_gap: least_core.witness.total() - vcg.total(),
            vcg_utilities: vcg,
            least_core,
            tie_break: opts.tie_break,
            iterations: 0,
        });
    }
    let v = game.grand_value()?;
    let eps = least_core.epsilon_star;
    let values = coalition_values(game, n)?;
    let mut cuts = Cuts::seeded(n, opts.method);
    for &s in &least_core.binding {
        if !cuts.sets.contains(&s) {
            cuts.sets.push(s);
        }
    }
    let vcg_u = vcg.values().to_vec();

    // Variables: u_0 .. u_{n-1} free, t free last. `fixed[a]` pins the gap
    // of an area; `cap` bounds t; `target` selects the objective.
    let build = |sets: &[AreaSet], fixed: &[Option<f64>], cap: Option<f64>, target: Option<usize>| {
        let mut costs = vec![0.0; n + 1];
        match target {
            None => costs[n] = 1.0,
            Some(a) => costs[a] = 1.0,
        }
        let mut p = LinearProgram::new(Direction::Minimize, costs);
        for a in 0..=n {
            p.free(a);
        }
        if let Some(c) = cap {
            p.set_bounds(n, c, c);
        }
        let mut all = vec![1.0; n + 1];
        all[n] = 0.0;
        p.add(all, Sense::Eq, v);
        for a in 0..n {
            let mut row = vec![0.0; n + 1];
            row[a] = 1.0;
            match fixed[a] {
                Some(g) => {
                    p.add(row, Sense::Eq, vcg_u[a] + g);
                }
                None => {
                    row[n] = -1.0;
                    p.add(row, Sense::Le, vcg_u[a]);
                }
            }
        }
        for &s in sets {
            p.add(coalition_row(s, n + 1), Sense::Ge, values[s.bits() as usize] - eps);
        }
        p
    };

    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut rounds = 0;
    let (first, r) = solve_with_cuts(
        game,
        &mut cuts,
        |_| eps,
        |sets| build(sets, &fixed, None, None),
        opts,
        "min-max program",
    )?;
    rounds += r;
    let max_gap = first.x[n];
    let mut u = first.x[..n].to_vec();

    if opts.tie_break == TieBreak::LexMinMax {
        let mut level = max_gap;
        loop {
            let free: Vec<usize> = (0..n).filter(|&a| fixed[a].is_none()).collect();
            if free.is_empty() {
                break;
            }
            // Areas whose gap cannot go below the current level are pinned.
            let mut pinned = Vec::new();
            for &a in &free {
                let (sol, r) = solve_with_cuts(
                    game,
                    &mut cuts,
                    |_| eps,
                    |sets| build(sets, &fixed, Some(level), Some(a)),
                    opts,
                    "refinement program",
                )?;
                rounds += r;
                if sol.x[a] - vcg_u[a] >= level - 1e-8 {
                    pinned.push(a);
                }
            }
            if pinned.is_empty() {
                // Numerically no area is forced; keep the current point.
                break;
            }
            for a in pinned {
                fixed[a] = Some(level);
            }
            if fixed.iter().all(Option::is_some) {
                break;
            }
            let (sol, r) = solve_with_cuts(
                game,
                &mut cuts,
                |_| eps,
                |sets| build(sets, &fixed, None, None),
                opts,
                "refinement program",
            )?;
            rounds += r;
            level = sol.x[n];
            u = sol.x[..n].to_vec();
        }
        // Final point with every pinned gap imposed exactly. `t` is held at
        // the optimum since it may no longer appear in any row.
        if fixed.iter().any(Option::is_some) {
            let (sol, r) = solve_with_cuts(
                game,
                &mut cuts,
                |_| eps,
                |sets| build(sets, &fixed, Some(max_gap), None),
                opts,
                "refinement program",
            )?;
            rounds += r;
            u = sol.x[..n].to_vec();
        }
    }

    Ok(MlcResult {
        utilities: PayoffVector::from_parts(players, u),
        vcg_utilities: vcg,
        least_core,
        max_gap,
        tie_break: opts.tie_break,
        iterations: rounds,
    })
}

/// The equivalent upper-bound system: for every proper coalition `S`
/// (including the empty one), `u(S) <= V - V(A \ S) + eps`.
pub fn upper_bound_system(game: &impl CoalitionalGame, eps: f64) -> Result<Vec<(AreaSet, f64)>> {
    let n = game.player_count();
    check_enumerable(n, DEFAULT_MAX_ENUMERATION_AREAS)?;
    let v = game.grand_value()?;
    let full = AreaSet::full(n);
    (0..(1u64 << n) - 1)
        .map(AreaSet::from_bits)
        .map(|s| Ok((s, v - game.value(s.complement(n) & full)? + eps)))
        .collect()
}

/// Budget equality plus the upper-bound system, as a membership test.
pub fn satisfies_upper_bounds(
    game: &impl CoalitionalGame,
    u: &PayoffVector,
    eps: f64,
    tol: f64,
) -> Result<bool> {
    check_payoff(game, u)?;
    if (u.total() - game.grand_value()?).abs() > tol {
        return Ok(false);
    }
    Ok(upper_bound_system(game, eps)?
        .into_iter()
        .all(|(s, b)| u.coalition_sum(s) <= b + tol))
}

/// On a star graph the hub taking the whole value `V` is a core point.
pub fn star_core_witness(game: &impl CoalitionalGame, network: &NetworkGraph) -> Result<PayoffVector> {
    let hub = network.is_star().ok_or(Error::NotAStar)?;
    if game.players() != network.areas() {
        return Err(Error::ProfileMismatch("game areas differ from the network's".into()));
    }
    let mut values = vec![0.0; game.player_count()];
    values[hub] = game.grand_value()?;
    Ok(PayoffVector::from_parts(game.players().to_vec(), values))
}

/// Convenience: the least core of a bid profile.
pub fn profile_least_core(
    profile: &BidProfile,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    opts: &LeastCoreOptions,
) -> Result<LeastCoreResult> {
    least_core_epsilon(&MarketGame::new(profile, network, grid)?, opts)
}
