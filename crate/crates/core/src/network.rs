//! Areas, tie-lines and the link-set operators used by clearing and the
//! coalitional game.
//!
//! Areas and links keep their declaration order. That order is the canonical
//! order for every set-valued result, for allocation vectors and for the
//! lexicographic tie-break in clearing.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on areas and links; sets are `u64` bitmasks.
pub const MAX_ELEMENTS: usize = 64;

macro_rules! id_newtype {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Self {
                Self(name.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Name of an area (country or region).
    AreaId
);
id_newtype!(
    /// Name of a tie-line.
    LinkId
);

macro_rules! bitset {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(u64);

        impl $name {
            pub const EMPTY: Self = Self(0);

            pub const fn from_bits(bits: u64) -> Self {
                Self(bits)
            }

            pub const fn bits(self) -> u64 {
                self.0
            }

            /// The set `{0, .., n-1}`.
            pub fn full(n: usize) -> Self {
                assert!(n <= MAX_ELEMENTS);
                if n == MAX_ELEMENTS {
                    Self(u64::MAX)
                } else {
                    Self((1u64 << n) - 1)
                }
            }

            pub fn singleton(i: usize) -> Self {
                assert!(i < MAX_ELEMENTS);
                Self(1 << i)
            }

            pub fn contains(self, i: usize) -> bool {
                i < MAX_ELEMENTS && self.0 & (1 << i) != 0
            }

            pub fn with(self, i: usize) -> Self {
                self | Self::singleton(i)
            }

            pub fn without(self, i: usize) -> Self {
                Self(self.0 & !(1u64 << i))
            }

            pub fn len(self) -> usize {
                self.0.count_ones() as usize
            }

            pub fn is_empty(self) -> bool {
                self.0 == 0
            }

            pub fn is_subset(self, other: Self) -> bool {
                self.0 & !other.0 == 0
            }

            /// Complement with respect to `{0, .., n-1}`.
            pub fn complement(self, n: usize) -> Self {
                Self(!self.0 & Self::full(n).0)
            }

            /// Members in ascending (canonical) order.
            pub fn iter(self) -> impl Iterator<Item = usize> {
                let mut bits = self.0;
                std::iter::from_fn(move || {
                    if bits == 0 {
                        None
                    } else {
                        let i = bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        Some(i)
                    }
                })
            }
        }

        impl std::ops::BitOr for $name {
            type Output = Self;
            fn bitor(self, rhs: Self) -> Self {
                Self(self.0 | rhs.0)
            }
        }

        impl std::ops::BitAnd for $name {
            type Output = Self;
            fn bitand(self, rhs: Self) -> Self {
                Self(self.0 & rhs.0)
            }
        }

        impl FromIterator<usize> for $name {
            fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
                iter.into_iter().fold(Self::EMPTY, Self::with)
            }
        }
    };
}

bitset!(
    /// A set of areas, indexed by canonical area position.
    AreaSet
);
bitset!(
    /// A set of links, indexed by canonical link position.
    LinkSet
);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub ends: [AreaId; 2],
}

impl Link {
    pub fn new(id: impl Into<LinkId>, a: impl Into<AreaId>, b: impl Into<AreaId>) -> Self {
        Self {
            id: id.into(),
            ends: [a.into(), b.into()],
        }
    }
}

/// A broken network invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoAreas,
    TooLarge { areas: usize, links: usize },
    EmptyAreaId,
    EmptyLinkId,
    DuplicateArea(AreaId),
    DuplicateLink(LinkId),
    UnknownEndpoint { link: LinkId, area: AreaId },
    SelfLoop(LinkId),
    ParallelLink { link: LinkId, existing: LinkId },
    Disconnected { unreachable: Vec<AreaId> },
}

impl Violation {
    /// Stable short code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::NoAreas => "no-areas",
            Violation::TooLarge { .. } => "too-large",
            Violation::EmptyAreaId | Violation::EmptyLinkId => "empty-id",
            Violation::DuplicateArea(_) => "duplicate-area",
            Violation::DuplicateLink(_) => "duplicate-link",
            Violation::UnknownEndpoint { .. } => "unknown-area",
            Violation::SelfLoop(_) => "self-loop",
            Violation::ParallelLink { .. } => "parallel-link",
            Violation::Disconnected { .. } => "disconnected",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.code())?;
        match self {
            Violation::NoAreas => write!(f, "network declares no areas"),
            Violation::TooLarge { areas, links } => write!(
                f,
                "{areas} areas / {links} links exceed the limit of {MAX_ELEMENTS}"
            ),
            Violation::EmptyAreaId => write!(f, "area with empty name"),
            Violation::EmptyLinkId => write!(f, "link with empty name"),
            Violation::DuplicateArea(a) => write!(f, "area `{a}` declared twice"),
            Violation::DuplicateLink(l) => write!(f, "link `{l}` declared twice"),
            Violation::UnknownEndpoint { link, area } => {
                write!(f, "link `{link}` ends at undeclared area `{area}`")
            }
            Violation::SelfLoop(l) => write!(f, "link `{l}` connects an area to itself"),
            Violation::ParallelLink { link, existing } => {
                write!(f, "link `{link}` duplicates the endpoints of `{existing}`")
            }
            Violation::Disconnected { unreachable } => {
                let names: Vec<&str> = unreachable.iter().map(AreaId::as_str).collect();
                write!(f, "areas {names:?} are not reachable from the first area")
            }
        }
    }
}

/// Undirected, simple, connected graph of areas and tie-lines.
///
/// Immutable after construction.
#[derive(Clone, Debug)]
pub struct NetworkGraph {
    areas: Vec<AreaId>,
    links: Vec<Link>,
    area_index: HashMap<AreaId, usize>,
    link_index: HashMap<LinkId, usize>,
    ends: Vec<Option<(usize, usize)>>,
    incident: Vec<LinkSet>,
}

impl PartialEq for NetworkGraph {
    fn eq(&self, other: &Self) -> bool {
        self.areas == other.areas && self.links == other.links
    }
}

impl NetworkGraph {
    /// Builds a graph and rejects it unless every invariant holds.
    pub fn new(areas: Vec<AreaId>, links: Vec<Link>) -> Result<Self> {
        let g = Self::from_parts(areas, links);
        let violations = g.validate();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidNetwork(violations))
        }
    }

    /// Builds a graph without validating it. Unresolvable endpoints are kept
    /// by name only and ignored by the link-set operators.
    pub fn from_parts(areas: Vec<AreaId>, links: Vec<Link>) -> Self {
        let mut area_index = HashMap::with_capacity(areas.len());
        for (i, a) in areas.iter().enumerate() {
            area_index.entry(a.clone()).or_insert(i);
        }
        let mut link_index = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            link_index.entry(l.id.clone()).or_insert(i);
        }
        let ends: Vec<Option<(usize, usize)>> = links
            .iter()
            .map(|l| {
                let a = area_index.get(&l.ends[0])?;
                let b = area_index.get(&l.ends[1])?;
                Some((*a, *b))
            })
            .collect();
        let mut incident = vec![LinkSet::EMPTY; areas.len()];
        if areas.len() <= MAX_ELEMENTS && links.len() <= MAX_ELEMENTS {
            for (e, pair) in ends.iter().enumerate() {
                if let Some((a, b)) = *pair {
                    incident[a] = incident[a].with(e);
                    incident[b] = incident[b].with(e);
                }
            }
        }
        Self {
            areas,
            links,
            area_index,
            link_index,
            ends,
            incident,
        }
    }

    /// Every violated invariant, in a fixed order. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.areas.is_empty() {
            out.push(Violation::NoAreas);
        }
        if self.areas.len() > MAX_ELEMENTS || self.links.len() > MAX_ELEMENTS {
            out.push(Violation::TooLarge {
                areas: self.areas.len(),
                links: self.links.len(),
            });
        }
        let mut seen = HashSet::new();
        for a in &self.areas {
            if a.as_str().is_empty() {
                out.push(Violation::EmptyAreaId);
            } else if !seen.insert(a) {
                out.push(Violation::DuplicateArea(a.clone()));
            }
        }
        let mut seen = HashSet::new();
        let mut pairs: HashMap<(usize, usize), &LinkId> = HashMap::new();
        for (link, ends) in self.links.iter().zip(&self.ends) {
            if link.id.as_str().is_empty() {
                out.push(Violation::EmptyLinkId);
            } else if !seen.insert(&link.id) {
                out.push(Violation::DuplicateLink(link.id.clone()));
            }
            for end in &link.ends {
                if !self.area_index.contains_key(end) {
                    out.push(Violation::UnknownEndpoint {
                        link: link.id.clone(),
                        area: end.clone(),
                    });
                }
            }
            if link.ends[0] == link.ends[1] {
                out.push(Violation::SelfLoop(link.id.clone()));
                continue;
            }
            if let Some((a, b)) = *ends {
                let key = (a.min(b), a.max(b));
                if let Some(existing) = pairs.get(&key) {
                    out.push(Violation::ParallelLink {
                        link: link.id.clone(),
                        existing: (*existing).clone(),
                    });
                } else {
                    pairs.insert(key, &link.id);
                }
            }
        }
        if !self.areas.is_empty() {
            let unreachable = self.unreachable_from_first();
            if !unreachable.is_empty() {
                out.push(Violation::Disconnected { unreachable });
            }
        }
        out
    }

    fn unreachable_from_first(&self) -> Vec<AreaId> {
        let n = self.areas.len();
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in self.ends.iter().flatten().copied() {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut reached = vec![false; n];
        reached[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(a) = queue.pop_front() {
            for &b in &adjacency[a] {
                if !reached[b] {
                    reached[b] = true;
                    queue.push_back(b);
                }
            }
        }
        self.areas
            .iter()
            .zip(reached)
            .filter(|(_, r)| !r)
            .map(|(a, _)| a.clone())
            .collect()
    }

    pub fn areas(&self) -> &[AreaId] {
        &self.areas
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn area_count(&self) -> usize {
        self.areas.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn all_areas(&self) -> AreaSet {
        AreaSet::full(self.areas.len())
    }

    pub fn all_links(&self) -> LinkSet {
        LinkSet::full(self.links.len())
    }

    pub fn area_index(&self, name: &str) -> Option<usize> {
        self.area_index.get(&AreaId::from(name)).copied()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(&LinkId::from(name)).copied()
    }

    pub fn area(&self, i: usize) -> &AreaId {
        &self.areas[i]
    }

    pub fn link(&self, e: usize) -> &Link {
        &self.links[e]
    }

    /// Endpoint positions of link `e`; `None` for unresolved endpoints.
    pub fn link_ends(&self, e: usize) -> Option<(usize, usize)> {
        self.ends[e]
    }

    /// Resolves area names to a set; fails on the first unknown name.
    pub fn area_set<S: AsRef<str>>(&self, names: &[S]) -> Result<AreaSet> {
        names.iter().try_fold(AreaSet::EMPTY, |set, name| {
            let name = name.as_ref();
            self.area_index(name)
                .map(|i| set.with(i))
                .ok_or_else(|| Error::UnknownArea(name.to_owned()))
        })
    }

    /// `E_a`: links with `a` as an endpoint.
    pub fn incident_links(&self, area: &str) -> Result<LinkSet> {
        let i = self
            .area_index(area)
            .ok_or_else(|| Error::UnknownArea(area.to_owned()))?;
        Ok(self.incident[i])
    }

    pub fn incident_links_of(&self, area: usize) -> LinkSet {
        self.incident[area]
    }

    /// `E_S`: links with exactly one endpoint in `s`.
    pub fn boundary_links(&self, s: AreaSet) -> LinkSet {
        self.links_where(|a, b| s.contains(a) != s.contains(b))
    }

    /// `E^R`: links with both endpoints in `r`.
    pub fn internal_links(&self, r: AreaSet) -> LinkSet {
        self.links_where(|a, b| r.contains(a) && r.contains(b))
    }

    fn links_where(&self, pred: impl Fn(usize, usize) -> bool) -> LinkSet {
        self.ends
            .iter()
            .enumerate()
            .filter_map(|(e, ends)| ends.filter(|&(a, b)| pred(a, b)).map(|_| e))
            .collect()
    }

    /// Hub of a star graph, if the graph is one. A single-link graph returns
    /// its first endpoint in canonical order.
    pub fn is_star(&self) -> Option<usize> {
        if self.areas.is_empty() || self.links.len() + 1 != self.areas.len() {
            return None;
        }
        let all = self.all_links();
        (0..self.areas.len()).find(|&a| self.incident[a] == all)
    }

    pub fn area_names(&self, s: AreaSet) -> Vec<&AreaId> {
        s.iter().map(|i| &self.areas[i]).collect()
    }

    pub fn link_names(&self, s: LinkSet) -> Vec<&LinkId> {
        s.iter().map(|e| &self.links[e].id).collect()
    }
}
