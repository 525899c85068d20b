use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which part of the real line a problem lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    RealLine,
    /// Wealth-type problems: every node is strictly positive.
    PositiveHalfLine,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::RealLine => f.write_str("real-line"),
            Domain::PositiveHalfLine => f.write_str("positive-half-line"),
        }
    }
}

/// Strictly increasing spatial nodes with a domain tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    domain: Domain,
}

impl SpatialGrid {
    pub const MIN_NODES: usize = 3;

    pub fn new(nodes: Vec<f64>, domain: Domain) -> Result<Self> {
        if nodes.len() < Self::MIN_NODES {
            return Err(Error::invalid(format!(
                "grid needs at least {} nodes, got {}",
                Self::MIN_NODES,
                nodes.len()
            )));
        }
        if let Some(bad) = nodes.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("grid node {bad} is not finite")));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "grid nodes not strictly increasing at index {}",
                i + 1
            )));
        }
        if domain == Domain::PositiveHalfLine && nodes[0] < 0.0 {
            return Err(Error::invalid(format!(
                "positive-half-line grid starts at {}",
                nodes[0]
            )));
        }
        Ok(Self { nodes, domain })
    }

    /// `count` equally spaced nodes from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, count: usize, domain: Domain) -> Result<Self> {
        if count < Self::MIN_NODES || !(hi > lo) {
            return Err(Error::invalid(format!(
                "uniform grid needs lo < hi and count >= 3 (lo={lo}, hi={hi}, count={count})"
            )));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
        nodes[count - 1] = hi;
        Self::new(nodes, domain)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Common spacing if the nodes are equally spaced to relative tolerance `rtol`.
    pub fn uniform_spacing(&self, rtol: f64) -> Option<f64> {
        let h = (self.hi() - self.lo()) / (self.len() - 1) as f64;
        self.nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= rtol * h)
            .then_some(h)
    }

    /// Largest gap between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Composite trapezoid rule, summed left to right.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Running trapezoid integral; the first entry is zero.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        out.push(acc);
    }
    out
}
