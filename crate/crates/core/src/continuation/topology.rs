//! Which Hopf points are joined by a cycle branch, and how that pairing
//! changes with the largest quartic zero `r1`.

use serde::{Deserialize, Serialize};

use super::cycles::{near_hopf, ContinuationSettings};
use super::{
    default_alpha_range, equilibrium_branch, lc_continue, lc_seed_near_hopf, Branch, BranchKind,
    Origin, Termination,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::quartic::QuarticSpec;

/// Two Hopf points on one cycle branch, smaller label first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connection(pub usize, pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub connected: Vec<Connection>,
    /// Hopf points whose branch runs toward `α = 0`.
    pub toward_small_alpha: Vec<usize>,
    /// Hopf points whose branch end matched nothing.
    pub inconclusive: Vec<usize>,
}

impl TopologyReport {
    pub fn is_conclusive(&self) -> bool {
        self.inconclusive.is_empty()
    }

    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .connected
            .iter()
            .map(|c| format!("H{}-H{} connected", c.0, c.1))
            .collect();
        parts.extend(
            self.toward_small_alpha
                .iter()
                .map(|h| format!("H{h} toward small alpha")),
        );
        parts.extend(
            self.inconclusive
                .iter()
                .map(|h| format!("H{h} inconclusive")),
        );
        parts.join("; ")
    }
}

/// Match branch ends against the Hopf points (`|Δα| < 1e-3`, relative
/// summary difference `< 1e-2`). Expects one branch per Hopf point, or
/// a branch whose far end already accounts for it.
pub fn branch_topology(params: &ModelParams, branches: &[Branch]) -> Result<TopologyReport> {
    let hopf = super::hopf_points(params, default_alpha_range(params)?)?;
    let min_alpha = hopf.iter().map(|h| h.alpha).fold(f64::INFINITY, f64::min);
    let mut report = TopologyReport {
        connected: Vec::new(),
        toward_small_alpha: Vec::new(),
        inconclusive: Vec::new(),
    };
    let mut covered = vec![false; hopf.len()];
    for br in branches.iter().filter(|b| b.kind == BranchKind::LimitCycle) {
        let Origin::Hopf(k) = br.origin else { continue };
        let Some(last) = br.points.last() else {
            continue;
        };
        covered[k - 1] = true;
        if let Some(h) = hopf.iter().find(|h| h.label != k && near_hopf(last, h)) {
            let c = Connection(k.min(h.label), k.max(h.label));
            covered[h.label - 1] = true;
            if !report.connected.contains(&c) {
                report.connected.push(c);
            }
        } else if matches!(
            br.termination,
            Termination::PeriodOverflow | Termination::DomainEdge
        ) && last.alpha < min_alpha
        {
            report.toward_small_alpha.push(k);
        } else {
            report.inconclusive.push(k);
        }
    }
    if let Some(k) = covered.iter().position(|c| !c) {
        return Err(Error::Precondition(format!(
            "no cycle branch accounts for H{}",
            k + 1
        )));
    }
    report.connected.sort();
    report.toward_small_alpha.sort();
    report.inconclusive.sort();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub equilibria: Branch,
    pub cycles: Vec<Branch>,
    pub topology: TopologyReport,
}

/// Equilibrium branch plus the cycle branch of every Hopf point not already
/// reached by an earlier branch.
pub fn continue_all(
    params: &ModelParams,
    settings: &ContinuationSettings,
) -> Result<BifurcationDiagram> {
    let range = match settings.alpha_range {
        Some(r) => r,
        None => default_alpha_range(params)?,
    };
    let equilibria = equilibrium_branch(params, range)?;
    let mut cycles: Vec<Branch> = Vec::new();
    for h in &equilibria.hopf {
        let reached = cycles
            .iter()
            .any(|b| b.termination == Termination::ConnectsTo(h.label));
        if reached {
            continue;
        }
        let seed = lc_seed_near_hopf(params, h)?;
        cycles.push(lc_continue(params, &seed, None, settings)?);
    }
    let topology = branch_topology(params, &cycles)?;
    Ok(BifurcationDiagram {
        equilibria,
        cycles,
        topology,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub r1: f64,
    pub topology: TopologyReport,
}

/// Topology for each `r1` with the other quartic data of `params` kept.
pub fn r1_sweep(
    params: &ModelParams,
    r1_values: &[f64],
    settings: &ContinuationSettings,
) -> Result<Vec<SweepEntry>> {
    r1_values
        .iter()
        .map(|&r1| {
            let mut p = *params;
            let mut r = p.quartic.r;
            r[0] = r1;
            p.quartic = QuarticSpec::new(p.quartic.q, p.quartic.c, r)?;
            let d = continue_all(&p, settings)?;
            Ok(SweepEntry {
                r1,
                topology: d.topology,
            })
        })
        .collect()
}

/// Consecutive sweep values between which the connected pairs change.
pub fn topology_changes(entries: &[SweepEntry]) -> Vec<(f64, f64)> {
    entries
        .windows(2)
        .filter(|w| w[0].topology.connected != w[1].topology.connected)
        .map(|w| (w[0].r1, w[1].r1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn report(connected: Vec<Connection>, toward: Vec<usize>) -> TopologyReport {
        TopologyReport {
            connected,
            toward_small_alpha: toward,
            inconclusive: Vec::new(),
        }
    }

    #[test]
    fn changes_are_bracketed() {
        let a = report(vec![Connection(1, 2)], vec![3]);
        let b = report(vec![Connection(2, 3)], vec![1]);
        let entries = [
            SweepEntry {
                r1: 6.0,
                topology: a.clone(),
            },
            SweepEntry {
                r1: 6.08,
                topology: b.clone(),
            },
            SweepEntry {
                r1: 6.15,
                topology: b,
            },
        ];
        assert_eq!(topology_changes(&entries), vec![(6.0, 6.08)]);
        assert_eq!(a.describe(), "H1-H2 connected; H3 toward small alpha");
        assert!(a.is_conclusive());
    }

    #[test]
    fn every_hopf_needs_a_branch() {
        let p = Scenario::Fig3.params();
        assert!(matches!(
            branch_topology(&p, &[]),
            Err(Error::Precondition(_))
        ));
    }
}
