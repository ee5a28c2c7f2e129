//! Allocation grids, tabulated bids and the transformations applied to them.
//!
//! A [`BidTable`] stores one value per grid tuple of the area's incident
//! links. Missing tuples mark allocations the area declares infeasible, so
//! the key set of a table is its feasible set.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation;
use crate::error::{Error, Result};
use crate::network::{AreaId, AreaSet, LinkId, LinkSet, NetworkGraph};
use crate::TOL;

/// Tolerance when matching a fraction to a grid point.
const GRID_MATCH: f64 = 1e-9;

/// Name of the generator behind [`sample_valuation_profile`].
pub const SAMPLER_NAME: &str = "ChaCha8Rng (rand_chacha 0.3), seed_from_u64";

/// Permitted capacity fractions per link and the default allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationGrid {
    axes: Vec<Vec<f64>>,
    defaults: Vec<usize>,
}

impl AllocationGrid {
    /// Same permitted list and default on every link.
    pub fn uniform(link_count: usize, values: Vec<f64>, default: f64) -> Result<Self> {
        Self::per_link(vec![(values, default); link_count])
    }

    /// One `(permitted values, default)` pair per link, in canonical link order.
    pub fn per_link(axes: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut out = Self {
            axes: Vec::with_capacity(axes.len()),
            defaults: Vec::with_capacity(axes.len()),
        };
        for (e, (values, default)) in axes.into_iter().enumerate() {
            if values.is_empty() {
                return Err(Error::InvalidGrid(format!("link #{e}: empty value list")));
            }
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidGrid(format!(
                    "link #{e}: value {v} outside [0, 1]"
                )));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "link #{e}: values are not strictly ascending"
                )));
            }
            let d = values
                .iter()
                .position(|v| (v - default).abs() <= GRID_MATCH)
                .ok_or_else(|| {
                    Error::InvalidGrid(format!(
                        "link #{e}: default {default} is not a permitted value"
                    ))
                })?;
            out.axes.push(values);
            out.defaults.push(d);
        }
        Ok(out)
    }

    pub fn link_count(&self) -> usize {
        self.axes.len()
    }

    pub fn values(&self, link: usize) -> &[f64] {
        &self.axes[link]
    }

    pub fn default_index(&self, link: usize) -> usize {
        self.defaults[link]
    }

    pub fn default_indices(&self) -> &[usize] {
        &self.defaults
    }

    pub fn default_value(&self, link: usize) -> f64 {
        self.axes[link][self.defaults[link]]
    }

    pub fn index_of(&self, link: usize, x: f64) -> Option<usize> {
        self.axes[link]
            .iter()
            .position(|v| (v - x).abs() <= GRID_MATCH)
    }

    /// Number of grid points over the given links (saturating).
    pub fn point_count(&self, links: LinkSet) -> u128 {
        links
            .iter()
            .fold(1u128, |acc, e| acc.saturating_mul(self.axes[e].len() as u128))
    }

    pub fn check(&self, network: &NetworkGraph) -> Result<()> {
        if self.axes.len() != network.link_count() {
            return Err(Error::DimensionMismatch {
                what: "grid axes vs network links".into(),
                expected: network.link_count(),
                got: self.axes.len(),
            });
        }
        Ok(())
    }

    pub fn default_allocation(&self) -> AllocationVector {
        AllocationVector::from_indices(self, self.defaults.clone())
    }
}

/// One grid point per link: the public choice `chi`.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationVector {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl AllocationVector {
    pub fn from_indices(grid: &AllocationGrid, indices: Vec<usize>) -> Self {
        let values = indices
            .iter()
            .enumerate()
            .map(|(e, &i)| grid.values(e)[i])
            .collect();
        Self { indices, values }
    }

    pub fn from_fractions(grid: &AllocationGrid, fractions: &[f64]) -> Result<Self> {
        if fractions.len() != grid.link_count() {
            return Err(Error::DimensionMismatch {
                what: "allocation vector".into(),
                expected: grid.link_count(),
                got: fractions.len(),
            });
        }
        let indices = fractions
            .iter()
            .enumerate()
            .map(|(e, &x)| {
                grid.index_of(e, x).ok_or(Error::OffGrid {
                    link: format!("#{e}"),
                    value: x,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_indices(grid, indices))
    }

    pub fn fractions(&self) -> &[f64] {
        &self.values
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn get(&self, link: usize) -> f64 {
        self.values[link]
    }

    /// Fractions of the given links, in their order.
    pub fn project(&self, links: LinkSet) -> Vec<f64> {
        links.iter().map(|e| self.values[e]).collect()
    }
}

/// A tabulated bid or valuation `b_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct BidTable {
    area: AreaId,
    links: Vec<LinkId>,
    axes: Vec<Vec<f64>>,
    default: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<Option<f64>>,
}

/// Visits every index vector of a mixed-radix space in lexicographic order
/// (first position most significant).
pub(crate) fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    loop {
        f(&idx);
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

impl BidTable {
    /// Tabulates `f` over the grid product of `links`. `f` receives the
    /// fractions in canonical link order and returns `None` for infeasible
    /// tuples.
    pub fn from_fn(
        area: impl Into<AreaId>,
        network: &NetworkGraph,
        grid: &AllocationGrid,
        links: LinkSet,
        f: impl FnMut(&[f64]) -> Option<f64>,
    ) -> Result<Self> {
        Self::tabulate(area, network, grid, links, f)?.normalized_default()
    }

    fn tabulate(
        area: impl Into<AreaId>,
        network: &NetworkGraph,
        grid: &AllocationGrid,
        links: LinkSet,
        mut f: impl FnMut(&[f64]) -> Option<f64>,
    ) -> Result<Self> {
        grid.check(network)?;
        let area = area.into();
        let link_idx: Vec<usize> = links.iter().collect();
        let axes: Vec<Vec<f64>> = link_idx.iter().map(|&e| grid.values(e).to_vec()).collect();
        let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
        let mut values = Vec::with_capacity(dims.iter().product());
        let mut x = vec![0.0; dims.len()];
        for_each_index(&dims, |idx| {
            for (k, &i) in idx.iter().enumerate() {
                x[k] = axes[k][i];
            }
            values.push(f(&x));
        });
        let table = Self {
            area,
            links: link_idx
                .iter()
                .map(|&e| network.link(e).id.clone())
                .collect(),
            default: link_idx.iter().map(|&e| grid.default_index(e)).collect(),
            strides: strides_of(&dims),
            axes,
            values,
        };
        Ok(table)
    }

    /// Builds a table over the area's incident links from explicit entries.
    /// Each tuple lists fractions in canonical incident-link order.
    pub fn from_entries(
        area: impl Into<AreaId>,
        network: &NetworkGraph,
        grid: &AllocationGrid,
        entries: &[(Vec<f64>, f64)],
    ) -> Result<Self> {
        let area = area.into();
        let links = network.incident_links(area.as_str())?;
        let link_idx: Vec<usize> = links.iter().collect();
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (tuple, value) in entries {
            if tuple.len() != link_idx.len() {
                return Err(Error::DimensionMismatch {
                    what: format!("tuple length for area `{area}`"),
                    expected: link_idx.len(),
                    got: tuple.len(),
                });
            }
            let key = tuple
                .iter()
                .zip(&link_idx)
                .map(|(&x, &e)| {
                    grid.index_of(e, x).ok_or_else(|| Error::OffGrid {
                        link: network.link(e).id.to_string(),
                        value: x,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if map.insert(key, *value).is_some() {
                return Err(Error::DuplicateEntry {
                    area: area.to_string(),
                    tuple: tuple.clone(),
                });
            }
        }
        let default: Vec<usize> = link_idx.iter().map(|&e| grid.default_index(e)).collect();
        if !map.contains_key(&default) {
            return Err(Error::TupleNotInDomain {
                area: area.to_string(),
                tuple: link_idx.iter().map(|&e| grid.default_value(e)).collect(),
            });
        }
        let default_value = map[&default];
        if default_value.abs() > TOL {
            return Err(Error::DefaultNotZero {
                area: area.to_string(),
                value: default_value,
            });
        }
        let mut lookup = map.into_iter();
        let mut pending = lookup.next();
        let dims: Vec<usize> = link_idx.iter().map(|&e| grid.values(e).len()).collect();
        let mut values = Vec::with_capacity(dims.iter().product());
        for_each_index(&dims, |idx| match &pending {
            Some((k, v)) if k.as_slice() == idx => {
                values.push(Some(*v));
                pending = lookup.next();
            }
            _ => values.push(None),
        });
        let mut table = Self {
            area,
            links: link_idx
                .iter()
                .map(|&e| network.link(e).id.clone())
                .collect(),
            axes: link_idx.iter().map(|&e| grid.values(e).to_vec()).collect(),
            strides: strides_of(&dims),
            default,
            values,
        };
        let d = table.flat(&table.default);
        table.values[d] = Some(0.0);
        Ok(table)
    }

    fn normalized_default(mut self) -> Result<Self> {
        let d = self.flat(&self.default);
        match self.values[d] {
            Some(v) if v.abs() <= TOL => {
                self.values[d] = Some(0.0);
                Ok(self)
            }
            Some(v) => Err(Error::DefaultNotZero {
                area: self.area.to_string(),
                value: v,
            }),
            None => Err(Error::TupleNotInDomain {
                area: self.area.to_string(),
                tuple: self.default_tuple(),
            }),
        }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn area(&self) -> &AreaId {
        &self.area
    }

    /// Domain links in canonical order.
    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn default_tuple(&self) -> Vec<f64> {
        self.default
            .iter()
            .enumerate()
            .map(|(k, &i)| self.axes[k][i])
            .collect()
    }

    /// Number of feasible tuples.
    pub fn len(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at a tuple of grid indices.
    pub fn value_at(&self, idx: &[usize]) -> Option<f64> {
        if idx.len() != self.axes.len() || idx.iter().zip(&self.axes).any(|(&i, a)| i >= a.len())
        {
            return None;
        }
        self.values[self.flat(idx)]
    }

    /// Lookup for clearing: `positions[k]` is the global link index of
    /// domain link `k`, `alloc` holds grid indices for every link.
    pub(crate) fn value_for(&self, positions: &[usize], alloc: &[usize]) -> Option<f64> {
        let mut f = 0;
        for (k, &e) in positions.iter().enumerate() {
            f += alloc[e] * self.strides[k];
        }
        self.values[f]
    }

    /// Exact lookup of a tuple of fractions; no interpolation.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let missing = || Error::TupleNotInDomain {
            area: self.area.to_string(),
            tuple: x.to_vec(),
        };
        if x.len() != self.axes.len() {
            return Err(missing());
        }
        let idx = x
            .iter()
            .zip(&self.axes)
            .map(|(&v, axis)| axis.iter().position(|a| (a - v).abs() <= GRID_MATCH))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(missing)?;
        self.values[self.flat(&idx)].ok_or_else(missing)
    }

    /// Feasible `(tuple, value)` pairs in lexicographic tuple order.
    pub fn entries(&self) -> Vec<(Vec<f64>, f64)> {
        let dims: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let mut out = Vec::with_capacity(self.values.len());
        let mut pos = 0;
        for_each_index(&dims, |idx| {
            if let Some(v) = self.values[pos] {
                let x = idx
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| self.axes[k][i])
                    .collect();
                out.push((x, v));
            }
            pos += 1;
        });
        out
    }

    /// Feasible values in storage order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    /// Same domain, every value multiplied by `k`.
    ///
    /// # Panics
    /// If `k` is negative or not finite.
    pub fn scaled(&self, k: f64) -> BidTable {
        assert!(k.is_finite() && k >= 0.0, "scale factor must be >= 0, got {k}");
        self.map_values(|_, v| v * k)
    }

    /// Applies `f(flat position, value)` to every feasible entry and resets
    /// the default entry to 0.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> BidTable {
        let mut out = self.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            if let Some(x) = v {
                *x = f(i, *x);
            }
        }
        let d = out.flat(&out.default);
        out.values[d] = Some(0.0);
        out
    }

    pub fn with_area(mut self, area: impl Into<AreaId>) -> Self {
        self.area = area.into();
        self
    }
}

/// Free-function alias of [`BidTable::evaluate`].
pub fn evaluate_bid(table: &BidTable, x: &[f64]) -> Result<f64> {
    table.evaluate(x)
}

/// Free-function alias of [`BidTable::scaled`].
pub fn scale_bid(table: &BidTable, k: f64) -> BidTable {
    table.scaled(k)
}

/// Weights of the quadratic valuation family
/// `sum_i q_i (x_i - x_i^2) + sum_{i<j} c_ij x_i x_j`.
///
/// Cross weights follow canonical pair order: (0,1), (0,2), .., (1,2), ..
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoefficients {
    pub quadratic: Vec<f64>,
    pub cross: Vec<f64>,
}

impl QuadraticCoefficients {
    pub fn cross_count(k: usize) -> usize {
        k * k.saturating_sub(1) / 2
    }

    /// Splits a flat row `[q_1..q_k, c_12, c_13, ..]` for `k` links.
    pub fn from_flat(k: usize, row: &[f64]) -> Result<Self> {
        let expected = k + Self::cross_count(k);
        if row.len() != expected {
            return Err(Error::DimensionMismatch {
                what: format!("quadratic coefficients for {k} links"),
                expected,
                got: row.len(),
            });
        }
        Ok(Self {
            quadratic: row[..k].to_vec(),
            cross: row[k..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.quadratic.iter().chain(&self.cross).copied().collect()
    }

    pub fn link_count(&self) -> usize {
        self.quadratic.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self
            .quadratic
            .iter()
            .zip(x)
            .map(|(q, xi)| q * (xi - xi * xi))
            .sum();
        let mut c = self.cross.iter();
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                v += c.next().copied().unwrap_or(0.0) * x[i] * x[j];
            }
        }
        v
    }
}

/// Tabulates the quadratic family over the area's incident links. When the
/// default allocation is not 0 the table is shifted so that it is 0 there.
pub fn quadratic_valuation(
    area: &str,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    coeffs: &QuadraticCoefficients,
) -> Result<BidTable> {
    let links = network.incident_links(area)?;
    let k = links.len();
    if coeffs.quadratic.len() != k || coeffs.cross.len() != QuadraticCoefficients::cross_count(k)
    {
        return Err(Error::DimensionMismatch {
            what: format!("quadratic coefficients of area `{area}`"),
            expected: k + QuadraticCoefficients::cross_count(k),
            got: coeffs.quadratic.len() + coeffs.cross.len(),
        });
    }
    let default: Vec<f64> = links.iter().map(|e| grid.default_value(e)).collect();
    let offset = coeffs.evaluate(&default);
    BidTable::from_fn(area, network, grid, links, |x| {
        Some(coeffs.evaluate(x) - offset)
    })
}

/// Uniform sampling intervals for the quadratic family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRanges {
    pub quadratic: [f64; 2],
    pub cross: [f64; 2],
}

impl Default for CoefficientRanges {
    fn default() -> Self {
        Self {
            quadratic: [0.0, 3.0],
            cross: [-9.0, 0.0],
        }
    }
}

impl CoefficientRanges {
    /// Every coefficient pinned to a single value.
    pub fn degenerate(quadratic: f64, cross: f64) -> Self {
        Self {
            quadratic: [quadratic, quadratic],
            cross: [cross, cross],
        }
    }

    fn check(&self) -> Result<()> {
        for [lo, hi] in [self.quadratic, self.cross] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "bad coefficient range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Draws one quadratic valuation per area. Draw order: areas in canonical
/// order, then quadratic weights by canonical link order, then cross weights
/// by canonical pair order.
pub fn sample_valuation_profile(
    network: &NetworkGraph,
    grid: &AllocationGrid,
    ranges: &CoefficientRanges,
    seed: u64,
) -> Result<BidProfile> {
    ranges.check()?;
    grid.check(network)?;
    if grid.link_count() == 0 {
        return Err(Error::InvalidGrid("grid has no links".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = BidProfile::new();
    for a in 0..network.area_count() {
        let k = network.incident_links_of(a).len();
        let [qlo, qhi] = ranges.quadratic;
        let [clo, chi] = ranges.cross;
        let quadratic = (0..k).map(|_| rng.gen_range(qlo..=qhi)).collect();
        let cross = (0..QuadraticCoefficients::cross_count(k))
            .map(|_| rng.gen_range(clo..=chi))
            .collect();
        let coeffs = QuadraticCoefficients { quadratic, cross };
        profile.insert(quadratic_valuation(
            network.area(a).as_str(),
            network,
            grid,
            &coeffs,
        )?);
    }
    Ok(profile)
}

/// The full set of bids `B` (or a coalition's subset `B_S`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BidProfile {
    tables: BTreeMap<AreaId, BidTable>,
}

impl BidProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tables(tables: impl IntoIterator<Item = BidTable>) -> Self {
        let mut p = Self::new();
        for t in tables {
            p.insert(t);
        }
        p
    }

    /// Inserts or replaces the table of `table.area()`.
    pub fn insert(&mut self, table: BidTable) -> Option<BidTable> {
        self.tables.insert(table.area().clone(), table)
    }

    pub fn remove(&mut self, area: &str) -> Option<BidTable> {
        self.tables.remove(&AreaId::from(area))
    }

    pub fn get(&self, area: &str) -> Option<&BidTable> {
        self.tables.get(&AreaId::from(area))
    }

    pub fn tables(&self) -> impl Iterator<Item = &BidTable> {
        self.tables.values()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Table of `area`, or [`Error::MissingBid`].
    pub fn require(&self, area: &AreaId) -> Result<&BidTable> {
        self.tables
            .get(area)
            .ok_or_else(|| Error::MissingBid(area.to_string()))
    }

    /// Checks that every table belongs to a known area, covers exactly that
    /// area's incident links and uses the grid's permitted values.
    pub fn check(&self, network: &NetworkGraph, grid: &AllocationGrid) -> Result<()> {
        grid.check(network)?;
        for t in self.tables.values() {
            let links = network.incident_links(t.area().as_str())?;
            let expected: Vec<&LinkId> = network.link_names(links);
            if t.links().iter().collect::<Vec<_>>() != expected {
                return Err(Error::ProfileMismatch(format!(
                    "table of `{}` covers {:?}, incident links are {:?}",
                    t.area(),
                    t.links(),
                    expected
                )));
            }
            for (k, e) in links.iter().enumerate() {
                if t.axis(k) != grid.values(e) {
                    return Err(Error::ProfileMismatch(format!(
                        "table of `{}` uses a different grid on `{}`",
                        t.area(),
                        network.link(e).id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that every area of the network has a table.
    pub fn check_complete(&self, network: &NetworkGraph) -> Result<()> {
        for a in network.areas() {
            self.require(a)?;
        }
        Ok(())
    }

    /// Sub-profile of the areas in `s`.
    pub fn restricted(&self, network: &NetworkGraph, s: AreaSet) -> BidProfile {
        BidProfile::from_tables(
            s.iter()
                .filter_map(|a| self.tables.get(network.area(a)).cloned()),
        )
    }

    /// Copy with the tables of `s` replaced by `f(table)`.
    pub fn transformed(
        &self,
        network: &NetworkGraph,
        s: AreaSet,
        mut f: impl FnMut(&BidTable) -> BidTable,
    ) -> BidProfile {
        let mut out = self.clone();
        for a in s.iter() {
            if let Some(t) = self.tables.get(network.area(a)) {
                out.insert(f(t).with_area(network.area(a).clone()));
            }
        }
        out
    }
}

/// Bid of a coalition acting as one pseudo-area.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedBid {
    /// Table over the coalition's boundary links, 0 at the default tuple.
    pub table: BidTable,
    /// Value subtracted to normalize the default tuple to 0; equals `V(B_S)`.
    pub offset: f64,
}

/// Merges the bids of `s` into one table over the boundary links `E_S`. For
/// each boundary tuple the coalition optimizes its internal links, subject
/// to every member's projected tuple being feasible. Boundary tuples with no
/// feasible completion are left out of the domain.
pub fn merge_bids(
    profile: &BidProfile,
    s: AreaSet,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<MergedBid> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("cannot merge an empty coalition".into()));
    }
    grid.check(network)?;
    let members: Vec<&BidTable> = s
        .iter()
        .map(|a| profile.require(network.area(a)))
        .collect::<Result<_>>()?;
    let name = network
        .area_names(s)
        .iter()
        .map(|a| a.as_str())
        .collect::<Vec<_>>()
        .join("+");
    if members.len() == 1 {
        return Ok(MergedBid {
            table: members[0].clone().with_area(name),
            offset: 0.0,
        });
    }
    let bound = members
        .iter()
        .map(|t| allocation::Bound::new(t, network, grid))
        .collect::<Result<Vec<_>>>()?;
    let boundary = network.boundary_links(s);
    let internal = network.internal_links(s);
    let boundary_idx: Vec<usize> = boundary.iter().collect();
    let mut base = grid.default_indices().to_vec();
    let raw = BidTable::tabulate(name.as_str(), network, grid, boundary, |x| {
        for (k, &e) in boundary_idx.iter().enumerate() {
            base[e] = grid.index_of(e, x[k]).expect("tuple from grid");
        }
        allocation::optimize(&bound, internal, &base, grid)
            .ok()
            .map(|r| r.value)
    })?;
    let d = raw.flat(&raw.default);
    let offset = raw.values[d].expect("default boundary tuple is always feasible");
    let table = raw.map_values(|_, v| v - offset);
    Ok(MergedBid { table, offset })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::network::tests::triangle;
    use approx::assert_abs_diff_eq;

    pub(crate) const CASE_COEFFS: [[f64; 3]; 3] = [
        [1.888, 1.120, -5.533],
        [2.262, 1.710, -5.012],
        [1.448, 2.305, -6.580],
    ];

    pub(crate) fn case_grid(links: usize) -> AllocationGrid {
        AllocationGrid::uniform(links, vec![0.0, 0.1, 0.2, 0.3, 0.4], 0.0).unwrap()
    }

    pub(crate) fn case_profile() -> (NetworkGraph, AllocationGrid, BidProfile) {
        let g = triangle();
        let grid = case_grid(3);
        let profile = BidProfile::from_tables(CASE_COEFFS.iter().enumerate().map(|(a, c)| {
            let coeffs = QuadraticCoefficients::from_flat(2, c).unwrap();
            quadratic_valuation(g.area(a).as_str(), &g, &grid, &coeffs).unwrap()
        }));
        (g, grid, profile)
    }

    /// Hand evaluation of the case-study quadratic for two links.
    fn oracle(c: [f64; 3], x: f64, y: f64) -> f64 {
        c[0] * (x - x * x) + c[1] * (y - y * y) + c[2] * x * y
    }

    #[test]
    fn case_study_values() {
        let (_, _, p) = case_profile();
        let a1 = p.get("a1").unwrap();
        assert_eq!(a1.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(a1.evaluate(&[0.4, 0.2]).unwrap(), 0.18968, epsilon = 1e-12);
        assert_abs_diff_eq!(
            a1.evaluate(&[0.4, 0.2]).unwrap(),
            oracle(CASE_COEFFS[0], 0.4, 0.2),
            epsilon = 1e-12
        );
        let a2 = p.get("a2").unwrap();
        assert_abs_diff_eq!(a2.evaluate(&[0.4, 0.0]).unwrap(), 0.54288, epsilon = 1e-12);
        let a3 = p.get("a3").unwrap();
        assert_abs_diff_eq!(a3.evaluate(&[0.4, 0.0]).unwrap(), 0.34752, epsilon = 1e-12);
        assert_abs_diff_eq!(a3.evaluate(&[0.2, 0.2]).unwrap(), 0.33728, epsilon = 1e-12);
        assert_eq!(a1.len(), 25);
    }

    #[test]
    fn evaluate_rejects_off_domain_tuples() {
        let (_, _, p) = case_profile();
        let a1 = p.get("a1").unwrap();
        assert!(matches!(
            a1.evaluate(&[0.5, 0.0]),
            Err(Error::TupleNotInDomain { .. })
        ));
        assert!(a1.evaluate(&[0.1]).is_err());
    }

    #[test]
    fn quadratic_dimension_mismatch() {
        let g = triangle();
        let grid = case_grid(3);
        let c = QuadraticCoefficients {
            quadratic: vec![1.0, 2.0, 3.0],
            cross: vec![0.0, 0.0, 0.0],
        };
        assert!(matches!(
            quadratic_valuation("a1", &g, &grid, &c),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(QuadraticCoefficients::from_flat(2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_at_default_for_any_coefficients() {
        let g = triangle();
        let grid = case_grid(3);
        let c = QuadraticCoefficients::from_flat(2, &[7.0, -3.0, 11.0]).unwrap();
        let t = quadratic_valuation("a2", &g, &grid, &c).unwrap();
        assert_eq!(t.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn nonzero_default_is_shifted() {
        let g = triangle();
        let grid = AllocationGrid::uniform(3, vec![0.0, 0.15, 0.3], 0.15).unwrap();
        let c = QuadraticCoefficients::from_flat(2, &[1.0, 1.0, -2.0]).unwrap();
        let t = quadratic_valuation("a1", &g, &grid, &c).unwrap();
        assert_eq!(t.evaluate(&[0.15, 0.15]).unwrap(), 0.0);
        let raw = c.evaluate(&[0.3, 0.0]) - c.evaluate(&[0.15, 0.15]);
        assert_abs_diff_eq!(t.evaluate(&[0.3, 0.0]).unwrap(), raw, epsilon = 1e-12);
    }

    #[test]
    fn table_entries_validation() {
        let g = triangle();
        let grid = case_grid(3);
        let ok = BidTable::from_entries("a1", &g, &grid, &[(vec![0.0, 0.0], 0.0), (vec![0.1, 0.4], 2.0)])
            .unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.evaluate(&[0.1, 0.4]).unwrap(), 2.0);
        assert!(ok.evaluate(&[0.1, 0.3]).is_err());

        let err = BidTable::from_entries("a1", &g, &grid, &[(vec![0.0, 0.0], 0.5)]).unwrap_err();
        assert!(matches!(err, Error::DefaultNotZero { .. }));
        let err = BidTable::from_entries("a1", &g, &grid, &[(vec![0.1, 0.0], 0.5)]).unwrap_err();
        assert!(matches!(err, Error::TupleNotInDomain { .. }));
        let err = BidTable::from_entries("a1", &g, &grid, &[(vec![0.0, 0.0], 0.0), (vec![0.05, 0.0], 1.0)])
            .unwrap_err();
        assert!(matches!(err, Error::OffGrid { .. }));
        let err = BidTable::from_entries(
            "a1",
            &g,
            &grid,
            &[(vec![0.0, 0.0], 0.0), (vec![0.1, 0.0], 1.0), (vec![0.1, 0.0], 2.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry { .. }));
    }

    #[test]
    fn grid_validation() {
        assert!(AllocationGrid::uniform(2, vec![], 0.0).is_err());
        assert!(AllocationGrid::uniform(2, vec![0.0, 0.2, 0.1], 0.0).is_err());
        assert!(AllocationGrid::uniform(2, vec![0.0, 1.5], 0.0).is_err());
        assert!(AllocationGrid::uniform(2, vec![0.0, 0.5], 0.3).is_err());
        let g = AllocationGrid::uniform(2, vec![0.0, 0.5], 0.5).unwrap();
        assert_eq!(g.default_index(1), 1);
    }

    #[test]
    fn scaling() {
        let (_, _, p) = case_profile();
        let a1 = p.get("a1").unwrap();
        assert_eq!(&a1.scaled(1.0), a1);
        assert!(a1.scaled(0.0).values().all(|v| v == 0.0));
        assert_abs_diff_eq!(
            scale_bid(a1, 5.0).evaluate(&[0.4, 0.2]).unwrap(),
            0.9484,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = triangle();
        let grid = case_grid(3);
        let r = CoefficientRanges::default();
        let a = sample_valuation_profile(&g, &grid, &r, 42).unwrap();
        let b = sample_valuation_profile(&g, &grid, &r, 42).unwrap();
        let c = sample_valuation_profile(&g, &grid, &r, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let zero = sample_valuation_profile(&g, &grid, &CoefficientRanges::degenerate(0.0, 0.0), 7)
            .unwrap();
        assert!(zero.tables().all(|t| t.values().all(|v| v == 0.0)));
        let pinned = sample_valuation_profile(&g, &grid, &CoefficientRanges::degenerate(1.0, -2.0), 7)
            .unwrap();
        assert_abs_diff_eq!(
            pinned.get("a3").unwrap().evaluate(&[0.4, 0.4]).unwrap(),
            2.0 * 0.24 - 2.0 * 0.16,
            epsilon = 1e-12
        );
        let bad = CoefficientRanges {
            quadratic: [3.0, 0.0],
            cross: [0.0, 0.0],
        };
        assert!(sample_valuation_profile(&g, &grid, &bad, 1).is_err());
    }

    #[test]
    fn merge_pair_of_case_study() {
        let (g, grid, p) = case_profile();
        let s = g.area_set(&["a1", "a2"]).unwrap();
        let merged = merge_bids(&p, s, &g, &grid).unwrap();
        assert_eq!(merged.table.area().as_str(), "a1+a2");
        let links: Vec<&str> = merged.table.links().iter().map(|l| l.as_str()).collect();
        assert_eq!(links, ["e2", "e3"]);
        assert_eq!(merged.table.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        // Before normalization the default boundary tuple is worth
        // max over chi_e1 of (1.888 + 2.262)(chi - chi^2), attained at 0.4.
        let brute = grid
            .values(0)
            .iter()
            .map(|x| 4.15 * (x - x * x))
            .fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(merged.offset, brute, epsilon = 1e-12);
        assert_abs_diff_eq!(merged.offset, 0.996, epsilon = 1e-12);
    }

    #[test]
    fn merge_singleton_is_identity() {
        let (g, grid, p) = case_profile();
        let s = g.area_set(&["a2"]).unwrap();
        let merged = merge_bids(&p, s, &g, &grid).unwrap();
        assert_eq!(merged.offset, 0.0);
        assert_eq!(merged.table.entries(), p.get("a2").unwrap().entries());
    }

    #[test]
    fn merge_brute_force_entry() {
        let (g, grid, p) = case_profile();
        let s = g.area_set(&["a1", "a2"]).unwrap();
        let merged = merge_bids(&p, s, &g, &grid).unwrap();
        let (x2, x3) = (0.3, 0.1);
        let best = grid
            .values(0)
            .iter()
            .map(|&x1| oracle(CASE_COEFFS[0], x1, x3) + oracle(CASE_COEFFS[1], x1, x2))
            .fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(
            merged.table.evaluate(&[x2, x3]).unwrap() + merged.offset,
            best,
            epsilon = 1e-12
        );
    }

    #[test]
    fn profile_check_catches_foreign_tables() {
        let (g, grid, p) = case_profile();
        assert!(p.check(&g, &grid).is_ok());
        let mut bad = p.clone();
        let other = p.get("a1").unwrap().clone().with_area("a2");
        bad.insert(other);
        assert!(matches!(bad.check(&g, &grid), Err(Error::ProfileMismatch(_))));
        let mut partial = p.clone();
        partial.remove("a3");
        assert_eq!(
            partial.check_complete(&g).unwrap_err(),
            Error::MissingBid("a3".into())
        );
    }
}
