//! Payment rules: Groves with the Clarke pivot (VCG), least-core-selecting
//! payments, and the min-max least-core (MLC) rule.
//!
//! Every rule is expressed through revealed utilities:
//! `p_a = b_a(chi*) - u_a`.

use serde::{Deserialize, Serialize};

use crate::bids::{AllocationGrid, BidProfile};
use crate::coalition::{
    epsilon_core_contains, least_core_epsilon, minmax_least_core, CoalitionalGame,
    LeastCoreOptions, MarketGame, PayoffVector, TieBreak,
};
use crate::error::{Error, Result};
use crate::network::{AreaId, LinkId, NetworkGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "VCG")]
    Vcg,
    #[serde(rename = "MLC")]
    Mlc,
    #[serde(rename = "least-core")]
    LeastCore,
    #[serde(rename = "custom")]
    Custom,
}

impl Mechanism {
    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Vcg => "VCG",
            Mechanism::Mlc => "MLC",
            Mechanism::LeastCore => "least-core",
            Mechanism::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaPayment {
    pub area: AreaId,
    pub payment: f64,
    pub bid_value: f64,
    pub revealed_utility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_utility: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentReport {
    pub mechanism: Mechanism,
    pub links: Vec<LinkId>,
    pub allocation: Vec<f64>,
    pub market_value: f64,
    pub areas: Vec<AreaPayment>,
    /// `u_MO = sum_a p_a`.
    pub organizer_balance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vcg_utilities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<TieBreak>,
}

impl PaymentReport {
    /// Report for the utilities `u` at the game's efficient allocation.
    pub fn from_utilities(game: &MarketGame<'_>, mechanism: Mechanism, u: &PayoffVector) -> Self {
        let clearing = game.clearing();
        let areas: Vec<AreaPayment> = u
            .iter()
            .map(|(area, ru)| {
                let bid_value = clearing.area_value(area.as_str()).unwrap_or(0.0);
                AreaPayment {
                    area: area.clone(),
                    payment: bid_value - ru,
                    bid_value,
                    revealed_utility: ru,
                    true_utility: None,
                }
            })
            .collect();
        Self {
            mechanism,
            links: game.network().links().iter().map(|l| l.id.clone()).collect(),
            allocation: clearing.allocation.fractions().to_vec(),
            market_value: clearing.value,
            organizer_balance: areas.iter().map(|a| a.payment).sum(),
            areas,
            epsilon_star: None,
            vcg_utilities: None,
            tie_break: None,
        }
    }

    pub fn area(&self, area: &str) -> Option<&AreaPayment> {
        self.areas.iter().find(|a| a.area.as_str() == area)
    }

    pub fn payments(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a.payment).collect()
    }

    pub fn revealed_utilities(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a.revealed_utility).collect()
    }

    /// True utilities `v_a(chi*) - p_a`, if filled in.
    pub fn true_utilities(&self) -> Option<Vec<f64>> {
        self.areas.iter().map(|a| a.true_utility).collect()
    }

    /// Fills in true utilities from a separate valuation profile.
    pub fn with_true_valuations(mut self, truth: &BidProfile, network: &NetworkGraph) -> Result<Self> {
        for a in &mut self.areas {
            let table = truth.require(&a.area)?;
            let links = network.incident_links(a.area.as_str())?;
            let x: Vec<f64> = links.iter().map(|e| self.allocation[e]).collect();
            a.true_utility = Some(table.evaluate(&x)? - a.payment);
        }
        Ok(self)
    }
}

/// Clarke-pivot payments: `p_a = b_a(chi*) - (V - V(A \ {a}))`.
pub fn vcg_payments(
    profile: &BidProfile,
    network: &NetworkGraph,
    grid: &AllocationGrid,
) -> Result<PaymentReport> {
    vcg_report(&MarketGame::new(profile, network, grid)?)
}

pub fn vcg_report(game: &MarketGame<'_>) -> Result<PaymentReport> {
    let u = game.vcg_utilities()?;
    Ok(PaymentReport::from_utilities(game, Mechanism::Vcg, &u))
}

/// Generic Groves payments `p_a = h_a - sum_{j != a} b_j(chi*)` with the
/// pivot values `h_a` given per area in canonical order.
pub fn groves_payments(game: &MarketGame<'_>, pivots: &[f64]) -> Result<PaymentReport> {
    let n = game.player_count();
    if pivots.len() != n {
        return Err(Error::DimensionMismatch {
            what: "pivot values".into(),
            expected: n,
            got: pivots.len(),
        });
    }
    let v = game.clearing().value;
    // u_a = b_a + sum_{j != a} b_j - h_a = V - h_a
    let u = PayoffVector::new(
        game.players().to_vec(),
        pivots.iter().map(|h| v - h).collect(),
    )?;
    Ok(PaymentReport::from_utilities(game, Mechanism::Custom, &u))
}

/// Payments for a caller-supplied least-core vector. The vector is checked
/// against the epsilon*-core first.
pub fn least_core_payments(
    profile: &BidProfile,
    u: &PayoffVector,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    opts: &LeastCoreOptions,
) -> Result<PaymentReport> {
    let game = MarketGame::new(profile, network, grid)?;
    let lc = least_core_epsilon(&game, opts)?;
    let check = epsilon_core_contains(&game, u, lc.epsilon_star, opts.tol)?;
    if !check.contained {
        let violation = check
            .violations
            .iter()
            .map(|v| v.1)
            .fold(check.budget_gap.abs(), f64::max);
        return Err(Error::NotInLeastCore { violation });
    }
    let mut report = PaymentReport::from_utilities(&game, Mechanism::LeastCore, u);
    report.epsilon_star = Some(lc.epsilon_star);
    Ok(report)
}

/// MLC payments: the least-core point closest to VCG in the min-max sense.
pub fn mlc_payments(
    profile: &BidProfile,
    network: &NetworkGraph,
    grid: &AllocationGrid,
    opts: &LeastCoreOptions,
) -> Result<PaymentReport> {
    mlc_report(&MarketGame::new(profile, network, grid)?, opts)
}

pub fn mlc_report(game: &MarketGame<'_>, opts: &LeastCoreOptions) -> Result<PaymentReport> {
    let m = minmax_least_core(game, opts)?;
    let mut report = PaymentReport::from_utilities(game, Mechanism::Mlc, &m.utilities);
    report.epsilon_star = Some(m.least_core.epsilon_star);
    report.vcg_utilities = Some(m.vcg_utilities.values().to_vec());
    report.tie_break = Some(m.tie_break);
    Ok(report)
}
