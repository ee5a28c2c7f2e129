//! JSON scenario files: network, grid, bids, optional true valuations and
//! experiment settings.
//!
//! Loading happens in two passes. The text is first deserialized into the
//! document types below (syntax and shape errors carry serde's line and
//! column). The document is then validated into crate types; every problem
//! becomes a [`Diagnostic`] with a stable code and a JSON pointer, which is
//! resolved to a line and column through a span-preserving parse.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bids::{
    quadratic_valuation, AllocationGrid, BidProfile, BidTable, CoefficientRanges,
    QuadraticCoefficients,
};
use crate::error::Error;
use crate::network::{Link, NetworkGraph, Violation};

/// The bundled case-study scenario.
pub const CASESTUDY_JSON: &str = include_str!("../fixtures/casestudy.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub areas: Vec<String>,
    pub links: Vec<LinkSpec>,
    pub grid: GridSpec,
    pub bids: Vec<BidSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<BidSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiments: Option<ExperimentSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    pub ends: [String; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub values: Vec<f64>,
    pub default: f64,
}

/// One axis shared by every link, or one axis per link id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform(AxisSpec),
    PerLink(BTreeMap<String, AxisSpec>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BidKind {
    Quadratic,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub x: Vec<f64>,
    pub value: f64,
}

/// A bid (or valuation). `links`, when given, must list the area's incident
/// links in declaration order; tuples in `entries` follow that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidSpec {
    pub area: String,
    pub kind: BidKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<EntrySpec>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<CoefficientRanges>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalition: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_bar: Option<f64>,
}

/// A validation problem located in the source document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    /// JSON pointer to the offending value.
    pub pointer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Diagnostic {
    fn new(code: &str, message: impl Into<String>, pointer: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
            pointer: pointer.into(),
            line: None,
            column: None,
        }
    }

    fn from_error(e: &Error, pointer: impl Into<String>) -> Self {
        Self::new(e.code(), e.to_string(), pointer)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, "line {l}, column {c}: ")?;
        }
        write!(f, "{} ({}) at {}", self.code, self.message, self.pointer)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} validation error(s):\n{}", .0.len(), join(.0))]
    Invalid(Vec<Diagnostic>),
}

impl ScenarioError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ScenarioError::Invalid(d) => d,
            _ => &[],
        }
    }

    /// Codes of all diagnostics, or the error kind for I/O and parse errors.
    pub fn codes(&self) -> Vec<&str> {
        match self {
            ScenarioError::Io { .. } => vec!["io"],
            ScenarioError::Parse { .. } => vec!["parse"],
            ScenarioError::Invalid(d) => d.iter().map(|d| d.code.as_str()).collect(),
        }
    }
}

fn join(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub network: NetworkGraph,
    pub grid: AllocationGrid,
    pub bids: BidProfile,
    pub truth: Option<BidProfile>,
}

impl Scenario {
    pub fn casestudy() -> Self {
        Self::from_json(CASESTUDY_JSON).expect("bundled case study is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file).map_err(|e| locate(e, text))
    }

    /// Validates a document. Diagnostics carry pointers but no positions.
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut diags = Vec::new();
        let network = match build_network(&file) {
            Ok(n) => n,
            Err(d) => return Err(ScenarioError::Invalid(d)),
        };
        let grid = match build_grid(&file.grid, &network) {
            Ok(g) => g,
            Err(d) => return Err(ScenarioError::Invalid(d)),
        };
        let bids = build_profile(&file.bids, "/bids", &network, &grid, &mut diags);
        let truth = file
            .truth
            .as_ref()
            .map(|t| build_profile(t, "/truth", &network, &grid, &mut diags));
        if let Some(x) = &file.experiments {
            check_experiments(x, &network, &mut diags);
        }
        if !diags.is_empty() {
            return Err(ScenarioError::Invalid(diags));
        }
        Ok(Self {
            file,
            network,
            grid,
            bids,
            truth,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("scenario documents serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// SHA-256 of the compact canonical serialization of the document.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.file).expect("scenario documents serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    /// True valuations if given, otherwise the bids.
    pub fn valuations(&self) -> &BidProfile {
        self.truth.as_ref().unwrap_or(&self.bids)
    }

    pub fn experiments(&self) -> ExperimentSpec {
        self.file.experiments.clone().unwrap_or_default()
    }
}

fn build_network(file: &ScenarioFile) -> Result<NetworkGraph, Vec<Diagnostic>> {
    let links: Vec<Link> = file
        .links
        .iter()
        .map(|l| Link::new(l.id.as_str(), l.ends[0].as_str(), l.ends[1].as_str()))
        .collect();
    let network = NetworkGraph::from_parts(
        file.areas.iter().map(|a| a.as_str().into()).collect(),
        links,
    );
    let violations = network.validate();
    if violations.is_empty() {
        return Ok(network);
    }
    let area_ptr = |name: &str| {
        let i = file.areas.iter().rposition(|a| a == name).unwrap_or(0);
        format!("/areas/{i}")
    };
    let link_ptr = |name: &str| {
        let i = file.links.iter().rposition(|l| l.id == name).unwrap_or(0);
        format!("/links/{i}")
    };
    Err(violations
        .iter()
        .map(|v| {
            let pointer = match v {
                Violation::NoAreas | Violation::TooLarge { .. } => "/areas".to_string(),
                Violation::EmptyAreaId => area_ptr(""),
                Violation::EmptyLinkId => link_ptr(""),
                Violation::DuplicateArea(a) => area_ptr(a.as_str()),
                Violation::DuplicateLink(l) | Violation::SelfLoop(l) => link_ptr(l.as_str()),
                Violation::ParallelLink { link, .. } => link_ptr(link.as_str()),
                Violation::UnknownEndpoint { link, area } => {
                    let i = file.links.iter().position(|l| l.id == link.as_str()).unwrap_or(0);
                    let k = file.links[i].ends.iter().position(|e| e == area.as_str()).unwrap_or(0);
                    format!("/links/{i}/ends/{k}")
                }
                Violation::Disconnected { .. } => "/links".to_string(),
            };
            Diagnostic::new(v.code(), v.to_string(), pointer)
        })
        .collect())
}

fn build_grid(spec: &GridSpec, network: &NetworkGraph) -> Result<AllocationGrid, Vec<Diagnostic>> {
    let result = match spec {
        GridSpec::Uniform(axis) => {
            AllocationGrid::uniform(network.link_count(), axis.values.clone(), axis.default)
        }
        GridSpec::PerLink(map) => {
            let mut diags = Vec::new();
            for id in map.keys() {
                if network.link_index(id).is_none() {
                    diags.push(Diagnostic::new(
                        "unknown-link",
                        format!("grid names undeclared link `{id}`"),
                        format!("/grid/{}", escape(id)),
                    ));
                }
            }
            for l in network.links() {
                if !map.contains_key(l.id.as_str()) {
                    diags.push(Diagnostic::new(
                        "grid-missing-link",
                        format!("grid has no axis for link `{}`", l.id),
                        "/grid",
                    ));
                }
            }
            if !diags.is_empty() {
                return Err(diags);
            }
            AllocationGrid::per_link(
                network
                    .links()
                    .iter()
                    .map(|l| {
                        let a = &map[l.id.as_str()];
                        (a.values.clone(), a.default)
                    })
                    .collect(),
            )
        }
    };
    result.map_err(|e| vec![Diagnostic::from_error(&e, "/grid")])
}

/// JSON pointer escaping of one reference token.
fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

fn build_profile(
    specs: &[BidSpec],
    base: &str,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    diags: &mut Vec<Diagnostic>,
) -> BidProfile {
    let mut profile = BidProfile::new();
    let mut seen = BTreeSet::new();
    for (i, spec) in specs.iter().enumerate() {
        let ptr = format!("{base}/{i}");
        if network.area_index(&spec.area).is_none() {
            diags.push(Diagnostic::new(
                "unknown-area",
                format!("bid for undeclared area `{}`", spec.area),
                format!("{ptr}/area"),
            ));
            continue;
        }
        if !seen.insert(spec.area.clone()) {
            diags.push(Diagnostic::new(
                "duplicate-bid",
                format!("area `{}` has more than one bid", spec.area),
                format!("{ptr}/area"),
            ));
            continue;
        }
        match build_table(spec, &ptr, network, grid) {
            Ok(t) => {
                profile.insert(t);
            }
            Err(d) => diags.extend(d),
        }
    }
    for a in network.areas() {
        if !seen.contains(a.as_str()) {
            diags.push(Diagnostic::new(
                "missing-bid",
                format!("no bid for area `{a}`"),
                base.to_string(),
            ));
        }
    }
    profile
}

fn build_table(
    spec: &BidSpec,
    ptr: &str,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<BidTable, Vec<Diagnostic>> {
    let area = spec.area.as_str();
    let incident = network
        .incident_links(area)
        .map_err(|e| vec![Diagnostic::from_error(&e, ptr)])?;
    let expected: Vec<&str> = network.link_names(incident).iter().map(|l| l.as_str()).collect();
    if let Some(links) = &spec.links {
        let mut diags = Vec::new();
        for (k, l) in links.iter().enumerate() {
            if network.link_index(l).is_none() {
                diags.push(Diagnostic::new(
                    "unknown-link",
                    format!("bid of `{area}` names undeclared link `{l}`"),
                    format!("{ptr}/links/{k}"),
                ));
            } else if !expected.contains(&l.as_str()) {
                let e = Error::NonIncidentLink {
                    area: area.to_string(),
                    link: l.clone(),
                };
                diags.push(Diagnostic::from_error(&e, format!("{ptr}/links/{k}")));
            }
        }
        if diags.is_empty() && links.iter().map(String::as_str).collect::<Vec<_>>() != expected {
            diags.push(Diagnostic::new(
                "link-order",
                format!("bid of `{area}` must list links {expected:?} in declaration order"),
                format!("{ptr}/links"),
            ));
        }
        if !diags.is_empty() {
            return Err(diags);
        }
    }
    match spec.kind {
        BidKind::Quadratic => {
            if spec.entries.is_some() {
                return Err(vec![Diagnostic::new(
                    "unexpected-field",
                    "quadratic bids take `coeffs`, not `entries`",
                    format!("{ptr}/entries"),
                )]);
            }
            let Some(coeffs) = &spec.coeffs else {
                return Err(vec![Diagnostic::new(
                    "missing-field",
                    "quadratic bid without `coeffs`",
                    ptr,
                )]);
            };
            let c = QuadraticCoefficients::from_flat(expected.len(), coeffs)
                .map_err(|e| vec![Diagnostic::from_error(&e, format!("{ptr}/coeffs"))])?;
            quadratic_valuation(area, network, grid, &c)
                .map_err(|e| vec![Diagnostic::from_error(&e, format!("{ptr}/coeffs"))])
        }
        BidKind::Table => {
            if spec.coeffs.is_some() {
                return Err(vec![Diagnostic::new(
                    "unexpected-field",
                    "table bids take `entries`, not `coeffs`",
                    format!("{ptr}/coeffs"),
                )]);
            }
            let Some(entries) = &spec.entries else {
                return Err(vec![Diagnostic::new(
                    "missing-field",
                    "table bid without `entries`",
                    ptr,
                )]);
            };
            let pairs: Vec<(Vec<f64>, f64)> =
                entries.iter().map(|e| (e.x.clone(), e.value)).collect();
            BidTable::from_entries(area, network, grid, &pairs).map_err(|e| {
                let at = entry_pointer(&e, entries, ptr);
                vec![Diagnostic::from_error(&e, at)]
            })
        }
    }
}

/// Points a table error at the entry that caused it.
fn entry_pointer(e: &Error, entries: &[EntrySpec], ptr: &str) -> String {
    let find = |pred: &dyn Fn(&EntrySpec) -> bool| entries.iter().position(pred);
    let at = match e {
        Error::DefaultNotZero { .. } => {
            find(&|en| en.value != 0.0 && en.x.iter().all(|v| *v == 0.0))
                .or_else(|| find(&|en| en.value != 0.0))
                .map(|i| format!("{ptr}/entries/{i}/value"))
        }
        Error::DuplicateEntry { tuple, .. } => entries
            .iter()
            .enumerate()
            .filter(|(_, en)| &en.x == tuple)
            .nth(1)
            .map(|(i, _)| format!("{ptr}/entries/{i}/x")),
        Error::OffGrid { value, .. } => entries.iter().enumerate().find_map(|(i, en)| {
            en.x.iter()
                .position(|v| v == value)
                .map(|k| format!("{ptr}/entries/{i}/x/{k}"))
        }),
        Error::DimensionMismatch { expected, .. } => find(&|en| en.x.len() != *expected)
            .map(|i| format!("{ptr}/entries/{i}/x")),
        _ => None,
    };
    at.unwrap_or_else(|| format!("{ptr}/entries"))
}

fn check_experiments(x: &ExperimentSpec, network: &NetworkGraph, diags: &mut Vec<Diagnostic>) {
    if let Some(c) = &x.coalition {
        for (k, a) in c.iter().enumerate() {
            if network.area_index(a).is_none() {
                diags.push(Diagnostic::new(
                    "unknown-area",
                    format!("experiment coalition names undeclared area `{a}`"),
                    format!("/experiments/coalition/{k}"),
                ));
            }
        }
    }
    if let Some(s) = x.scale {
        if !(s.is_finite() && s >= 0.0) {
            diags.push(Diagnostic::new(
                "invalid-argument",
                format!("scale factor must be >= 0, got {s}"),
                "/experiments/scale",
            ));
        }
    }
    if x.samples == Some(0) {
        diags.push(Diagnostic::new(
            "invalid-argument",
            "sample count must be at least 1",
            "/experiments/samples",
        ));
    }
}

/// Fills in line and column of each diagnostic from the source text.
fn locate(err: ScenarioError, text: &str) -> ScenarioError {
    let ScenarioError::Invalid(diags) = err else {
        return err;
    };
    let Ok(root) = json_spanned_value::from_str::<json_spanned_value::spanned::Value>(text) else {
        return ScenarioError::Invalid(diags);
    };
    let diags = diags
        .into_iter()
        .map(|mut d| {
            // Walk up to the nearest existing ancestor.
            let mut p = d.pointer.as_str();
            let start = loop {
                if let Some(v) = root.pointer(p) {
                    break Some(v.start());
                }
                match p.rfind('/') {
                    Some(i) => p = &p[..i],
                    None => break None,
                }
            };
            if let Some(offset) = start {
                let (line, column) = line_col(text, offset);
                d.line = Some(line);
                d.column = Some(column);
            }
            d
        })
        .collect();
    ScenarioError::Invalid(diags)
}

/// 1-based line and column (in characters) of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
