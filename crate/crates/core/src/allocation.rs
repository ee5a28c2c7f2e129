//! Efficient clearing and coalitional values by exhaustive grid enumeration.
//!
//! Points are visited in lexicographic order of the allocation vector
//! (canonical link order, first link most significant). A later point
//! replaces the incumbent only if it is better by more than [`TOL`], so among
//! tied optima the lexicographically smallest allocation wins.

use crate::bids::{AllocationGrid, AllocationVector, BidProfile, BidTable};
use crate::error::{Error, Result};
use crate::network::{AreaId, AreaSet, LinkSet, NetworkGraph};
use crate::TOL;

/// Name of the tie-breaking rule, echoed in reports.
pub const TIE_BREAK_RULE: &str = "lexicographically smallest allocation (canonical link order)";

#[derive(Clone, Debug, PartialEq)]
pub struct ClearingResult {
    pub allocation: AllocationVector,
    pub value: f64,
    /// Bid value of each participant at the chosen allocation.
    pub area_values: Vec<(AreaId, f64)>,
}

impl ClearingResult {
    pub fn area_value(&self, area: &str) -> Option<f64> {
        self.area_values
            .iter()
            .find(|(a, _)| a.as_str() == area)
            .map(|(_, v)| *v)
    }
}

/// A table together with the global positions of its domain links.
pub(crate) struct Bound<'a> {
    table: &'a BidTable,
    positions: Vec<usize>,
}

impl<'a> Bound<'a> {
    pub(crate) fn new(
        table: &'a BidTable,
        network: &NetworkGraph,
        grid: &AllocationGrid,
    ) -> Result<Self> {
        let positions = table
            .links()
            .iter()
            .map(|l| {
                network
                    .link_index(l.as_str())
                    .ok_or_else(|| Error::UnknownLink(l.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, &e) in positions.iter().enumerate() {
            if table.axis(k) != grid.values(e) {
                return Err(Error::ProfileMismatch(format!(
                    "table of `{}` uses a different grid on `{}`",
                    table.area(),
                    table.links()[k]
                )));
            }
        }
        Ok(Self { table, positions })
    }
}

/// Maximizes the participants' total over the `free` links; every other
/// link stays at its entry in `base` (grid indices for all links).
pub(crate) fn optimize(
    participants: &[Bound<'_>],
    free: LinkSet,
    base: &[usize],
    grid: &AllocationGrid,
) -> Result<ClearingResult> {
    let free: Vec<usize> = free.iter().collect();
    let mut idx = base.to_vec();
    for &e in &free {
        idx[e] = 0;
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    'points: loop {
        let mut total = 0.0;
        let mut feasible = true;
        for p in participants {
            match p.table.value_for(&p.positions, &idx) {
                Some(v) => total += v,
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && best.as_ref().is_none_or(|(b, _)| total > b + TOL) {
            best = Some((total, idx.clone()));
        }
        let mut k = free.len();
        loop {
            if k == 0 {
                break 'points;
            }
            k -= 1;
            let e = free[k];
            idx[e] += 1;
            if idx[e] < grid.values(e).len() {
                break;
            }
            idx[e] = 0;
        }
    }
    let (value, best) = best.ok_or(Error::NoFeasibleAllocation)?;
    let area_values = participants
        .iter()
        .map(|p| {
            let v = p
                .table
                .value_for(&p.positions, &best)
                .expect("optimum is feasible");
            (p.table.area().clone(), v)
        })
        .collect();
    Ok(ClearingResult {
        allocation: AllocationVector::from_indices(grid, best),
        value,
        area_values,
    })
}

fn bind_areas<'a>(
    profile: &'a BidProfile,
    s: AreaSet,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<Vec<Bound<'a>>> {
    s.iter()
        .map(|a| Bound::new(profile.require(network.area(a))?, network, grid))
        .collect()
}

/// Efficient allocation: maximizes the sum of all bids over the grid.
pub fn clear_market(
    profile: &BidProfile,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<ClearingResult> {
    coalitional_value(profile, network.all_areas(), network, grid)
}

/// `V(B_S)`: the best total the members of `s` reach by moving only the
/// links internal to `s`; all other links stay at the default.
pub fn coalitional_value(
    profile: &BidProfile,
    s: AreaSet,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<ClearingResult> {
    grid.check(network)?;
    let participants = bind_areas(profile, s, network, grid)?;
    optimize(
        &participants,
        network.internal_links(s),
        grid.default_indices(),
        grid,
    )
}

/// Clears an arbitrary set of tables (for example a profile in which a
/// coalition is replaced by its merged bid). Links outside `free` stay at
/// the default.
pub fn clear_tables(
    tables: &[&BidTable],
    free: LinkSet,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<ClearingResult> {
    grid.check(network)?;
    let participants = tables
        .iter()
        .map(|t| Bound::new(t, network, grid))
        .collect::<Result<Vec<_>>>()?;
    optimize(&participants, free, grid.default_indices(), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bids::tests::{case_profile, CASE_COEFFS};
    use crate::bids::{merge_bids, sample_valuation_profile, CoefficientRanges};
    use crate::network::tests::arb_network;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Independent enumeration of the 125 case-study grid points with the
    /// valuation formulas written out by hand.
    fn oracle_case_study() -> ([f64; 3], f64) {
        let g = [0.0, 0.1, 0.2, 0.3, 0.4];
        let v = |c: [f64; 3], x: f64, y: f64| c[0] * (x - x * x) + c[1] * (y - y * y) + c[2] * x * y;
        let mut best = ([0.0; 3], f64::MIN);
        for &x1 in &g {
            for &x2 in &g {
                for &x3 in &g {
                    let total = v(CASE_COEFFS[0], x1, x3)
                        + v(CASE_COEFFS[1], x1, x2)
                        + v(CASE_COEFFS[2], x2, x3);
                    if total > best.1 + 1e-9 {
                        best = ([x1, x2, x3], total);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn case_study_clearing() {
        let (g, grid, p) = case_profile();
        let r = clear_market(&p, &g, &grid).unwrap();
        let (x, v) = oracle_case_study();
        assert_eq!(r.allocation.fractions(), &[0.4, 0.0, 0.2]);
        assert_eq!(r.allocation.fractions(), &x);
        assert_abs_diff_eq!(r.value, v, epsilon = 1e-12);
        assert_abs_diff_eq!(r.value, 1.10136, epsilon = 1e-9);
        assert_abs_diff_eq!(r.area_value("a1").unwrap(), 0.18968, epsilon = 1e-12);
        assert_abs_diff_eq!(r.area_value("a2").unwrap(), 0.54288, epsilon = 1e-12);
        assert_abs_diff_eq!(r.area_value("a3").unwrap(), 0.36880, epsilon = 1e-12);
        let sum: f64 = r.area_values.iter().map(|(_, v)| v).sum();
        assert_abs_diff_eq!(sum, r.value, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_bids_pick_default() {
        let (g, grid, p) = case_profile();
        let zero = BidProfile::from_tables(p.tables().map(|t| t.scaled(0.0)));
        let r = clear_market(&zero, &g, &grid).unwrap();
        assert_eq!(r.allocation, grid.default_allocation());
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn case_study_coalitions() {
        let (g, grid, p) = case_profile();
        let v = |names: &[&str]| {
            coalitional_value(&p, g.area_set(names).unwrap(), &g, &grid).unwrap()
        };
        let r12 = v(&["a1", "a2"]);
        assert_abs_diff_eq!(r12.value, 0.996, epsilon = 1e-12);
        assert_eq!(r12.allocation.fractions(), &[0.4, 0.0, 0.0]);
        let r23 = v(&["a2", "a3"]);
        let brute = [0.0, 0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|x| (1.710 + 1.448) * (x - x * x))
            .fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(r23.value, brute, epsilon = 1e-12);
        assert_abs_diff_eq!(r23.value, 0.75792, epsilon = 1e-12);
        assert_eq!(r23.allocation.fractions(), &[0.0, 0.4, 0.0]);
        assert_abs_diff_eq!(v(&["a1", "a3"]).value, 0.822, epsilon = 1e-12);
        for a in ["a1", "a2", "a3"] {
            assert_eq!(v(&[a]).value, 0.0);
        }
        assert_eq!(v(&[]).value, 0.0);
        assert_eq!(v(&["a1", "a2", "a3"]), clear_market(&p, &g, &grid).unwrap());
    }

    #[test]
    fn infeasible_tuples_exclude_allocations() {
        let (g, grid, p) = case_profile();
        // a2 refuses any allocation with chi_e1 = 0.4.
        let a2 = p.get("a2").unwrap();
        let entries: Vec<_> = a2
            .entries()
            .into_iter()
            .filter(|(x, _)| x[0] < 0.35)
            .collect();
        let mut q = p.clone();
        q.insert(BidTable::from_entries("a2", &g, &grid, &entries).unwrap());
        let r = clear_market(&q, &g, &grid).unwrap();
        assert!(r.allocation.get(0) < 0.35);
    }

    #[test]
    fn missing_bid_is_an_error() {
        let (g, grid, mut p) = case_profile();
        p.remove("a2");
        assert_eq!(
            clear_market(&p, &g, &grid).unwrap_err(),
            Error::MissingBid("a2".into())
        );
    }

    #[test]
    fn merged_clearing_reproduces_value() {
        let (g, grid, p) = case_profile();
        let s = g.area_set(&["a1", "a2"]).unwrap();
        let merged = merge_bids(&p, s, &g, &grid).unwrap();
        let a3 = p.get("a3").unwrap();
        let free = g.all_links() & g.internal_links(s).complement(g.link_count());
        let r = clear_tables(&[&merged.table, a3], free, &g, &grid).unwrap();
        assert_abs_diff_eq!(r.value + merged.offset, 1.10136, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn value_is_monotone_and_vanishes_on_singletons(
            (g, seed) in arb_network(4).prop_flat_map(|g| (Just(g), any::<u64>()))
        ) {
            let grid = AllocationGrid::uniform(g.link_count(), vec![0.0, 0.2, 0.4], 0.0).unwrap();
            let p = sample_valuation_profile(&g, &grid, &CoefficientRanges::default(), seed).unwrap();
            let n = g.area_count();
            let values: Vec<f64> = (0..1u64 << n)
                .map(|bits| coalitional_value(&p, AreaSet::from_bits(bits), &g, &grid).unwrap().value)
                .collect();
            prop_assert_eq!(values[0], 0.0);
            for a in 0..n {
                prop_assert_eq!(values[1 << a], 0.0);
            }
            for s in 0..1usize << n {
                for a in 0..n {
                    let t = s | 1 << a;
                    prop_assert!(values[s] <= values[t] + 1e-9);
                }
            }
            let full = clear_market(&p, &g, &grid).unwrap();
            prop_assert_eq!(full.value, values[(1 << n) - 1]);
            prop_assert_eq!(&clear_market(&p, &g, &grid).unwrap(), &full);
        }

        #[test]
        fn merging_preserves_market_value(
            (g, seed, bits) in arb_network(4).prop_flat_map(|g| {
                let n = g.area_count();
                (Just(g), any::<u64>(), 1..(1u64 << n))
            })
        ) {
            let grid = AllocationGrid::uniform(g.link_count(), vec![0.0, 0.2, 0.4], 0.0).unwrap();
            let p = sample_valuation_profile(&g, &grid, &CoefficientRanges::default(), seed).unwrap();
            let s = AreaSet::from_bits(bits);
            let merged = merge_bids(&p, s, &g, &grid).unwrap();
            let rest = s.complement(g.area_count());
            let mut tables: Vec<&BidTable> = rest.iter().map(|a| p.get(g.area(a).as_str()).unwrap()).collect();
            tables.push(&merged.table);
            let free = g.internal_links(s).complement(g.link_count());
            let r = clear_tables(&tables, free, &g, &grid).unwrap();
            let direct = clear_market(&p, &g, &grid).unwrap();
            prop_assert!((r.value + merged.offset - direct.value).abs() <= 1e-9);
            let vs = coalitional_value(&p, s, &g, &grid).unwrap().value;
            prop_assert!((merged.offset - vs).abs() <= 1e-9);
        }
    }
}
