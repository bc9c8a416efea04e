//! Periodic interface graphs and the cut-cell domains beneath (or above) them.
//!
//! The horizontal direction is a torus of length `period` sampled at `n_x`
//! columns; the vertical direction has node rows `j = 0..=n_y` at heights
//! `y_j = j * dy`, where row 0 is the bottom boundary and row `n_y` the top.
//! The interface is the piecewise-linear interpolant of the column samples.

use crate::error::{FbError, Result};

/// Uniform node lattice on `[0, period) x [0, height_cap]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n_x: usize,
    n_y: usize,
    period: f64,
    height_cap: f64,
}

impl PeriodicGrid {
    pub fn new(n_x: usize, n_y: usize, period: f64, height_cap: f64) -> Result<Self> {
        if n_x < 8 || n_y < 8 {
            return Err(FbError::InvalidGrid(format!(
                "need n_x >= 8 and n_y >= 8, got {n_x} x {n_y}"
            )));
        }
        if !(period.is_finite() && period > 0.0 && height_cap.is_finite() && height_cap > 0.0) {
            return Err(FbError::InvalidGrid(format!(
                "period and height_cap must be positive, got {period} and {height_cap}"
            )));
        }
        Ok(Self {
            n_x,
            n_y,
            period,
            height_cap,
        })
    }

    /// Grid with `dy == dx`, i.e. `height_cap = n_y * period / n_x`.
    pub fn isotropic(n_x: usize, n_y: usize, period: f64) -> Result<Self> {
        Self::new(n_x, n_y, period, n_y as f64 * period / n_x as f64)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn height_cap(&self) -> f64 {
        self.height_cap
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n_x as f64
    }

    pub fn dy(&self) -> f64 {
        self.height_cap / self.n_y as f64
    }

    pub fn h_min(&self) -> f64 {
        self.dx().min(self.dy())
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n_x as isize) as usize
    }

    /// Column positions `x_i`.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }

    /// Signed minimal-image offset of `x` from `x0`, in `[-period/2, period/2)`.
    pub fn periodic_offset(&self, x: f64, x0: f64) -> f64 {
        let p = self.period;
        (x - x0 + 0.5 * p).rem_euclid(p) - 0.5 * p
    }

    /// Flat node key `j * n_x + i`.
    pub fn node_key(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }

    pub fn node_count(&self) -> usize {
        self.n_x * (self.n_y + 1)
    }
}

/// Samples of the interface height `f` together with its admissible band.
///
/// The band is `[delta, height_cap - delta]`; in the two-phase strip the
/// grid's `height_cap` is the strip height `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInterface {
    values: Vec<f64>,
    grid: PeriodicGrid,
    delta: f64,
    two_phase: bool,
}

impl GraphInterface {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>, delta: f64, two_phase: bool) -> Result<Self> {
        if values.len() != grid.n_x() {
            return Err(FbError::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.n_x(),
                values.len()
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(FbError::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        let g = Self {
            values,
            grid,
            delta,
            two_phase,
        };
        let bad = g.band_violations();
        if !bad.is_empty() {
            return Err(FbError::PhaseBand {
                t: None,
                columns: bad,
            });
        }
        Ok(g)
    }

    pub fn one_phase(grid: PeriodicGrid, values: Vec<f64>, delta: f64) -> Result<Self> {
        Self::new(grid, values, delta, false)
    }

    pub fn two_phase(grid: PeriodicGrid, values: Vec<f64>, delta: f64) -> Result<Self> {
        Self::new(grid, values, delta, true)
    }

    /// Samples `f(x_i)` of a closure.
    pub fn from_fn(
        grid: PeriodicGrid,
        delta: f64,
        two_phase: bool,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = grid.xs().into_iter().map(f).collect();
        Self::new(grid, values, delta, two_phase)
    }

    /// Same grid and band with new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, values, self.delta, self.two_phase)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn upper(&self) -> f64 {
        self.grid.height_cap() - self.delta
    }

    pub fn is_two_phase(&self) -> bool {
        self.two_phase
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Columns whose sample is non-finite or outside `[delta, upper]`.
    pub fn band_violations(&self) -> Vec<usize> {
        band_violations(&self.values, self.delta, self.upper())
    }

    /// Integer column shift: `shifted(j)[i] == f[i + j]`.
    pub fn shifted(&self, j: isize) -> Self {
        let n = self.values.len();
        let values = (0..n)
            .map(|i| self.values[self.grid.wrap(i as isize + j)])
            .collect();
        Self { values, ..self.clone() }
    }

    /// Column reflection: `reflected()[i] == f[-i]`.
    pub fn reflected(&self) -> Self {
        let values = (0..self.values.len())
            .map(|i| self.values[self.grid.wrap(-(i as isize))])
            .collect();
        Self { values, ..self.clone() }
    }

    pub fn add_constant(&self, s: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v + s).collect())
    }

    /// Piecewise-linear periodic interpolant.
    pub fn interpolate(&self, x: f64) -> f64 {
        let dx = self.grid.dx();
        let s = x.rem_euclid(self.grid.period()) / dx;
        let i0 = (s.floor() as usize).min(self.grid.n_x() - 1);
        let t = s - i0 as f64;
        let i1 = (i0 + 1) % self.grid.n_x();
        self.values[i0] * (1.0 - t) + self.values[i1] * t
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_i |f_{i+1} - f_i| / dx`.
    pub fn lipschitz_seminorm(&self) -> f64 {
        lipschitz_seminorm(&self.values, self.grid.dx())
    }

    /// `max_i |f_{i+h} - f_i|` for an integer column shift `h`.
    pub fn shift_modulus(&self, h: usize) -> f64 {
        shift_modulus(&self.values, h)
    }
}

pub(crate) fn band_violations(values: &[f64], delta: f64, upper: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !(v.is_finite() && **v >= delta && **v <= upper))
        .map(|(i, _)| i)
        .collect()
}

pub fn lipschitz_seminorm(values: &[f64], dx: f64) -> f64 {
    shift_modulus(values, 1) / dx
}

pub fn shift_modulus(values: &[f64], h: usize) -> f64 {
    let n = values.len();
    (0..n).fold(0.0, |m, i| m.max((values[(i + h) % n] - values[i]).abs()))
}

/// Periodic central differences `(f_{i+1} - f_{i-1}) / (2 dx)`.
pub fn graph_gradient(f: &GraphInterface) -> Vec<f64> {
    let v = f.values();
    let n = v.len();
    let two_dx = 2.0 * f.grid().dx();
    (0..n)
        .map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) / two_dx)
        .collect()
}

/// Unit normal `(f'_i, -1) / sqrt(1 + f'_i^2)`, pointing down into the region under the graph.
pub fn interface_normal(f: &GraphInterface, i: usize) -> [f64; 2] {
    let v = f.values();
    let n = v.len();
    let slope = (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * f.grid().dx());
    normal_from_slope(slope)
}

pub(crate) fn normal_from_slope(slope: f64) -> [f64; 2] {
    let s = (1.0 + slope * slope).sqrt();
    [slope / s, -1.0 / s]
}

/// Which side of the graph a domain occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// `0 < y < f(x)`, bottom boundary row 0.
    Positive,
    /// `f(x) < y < L`, top boundary row `n_y`.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Bottom,
    Top,
    Interface,
}

/// Far end of a stencil leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegEnd {
    /// Another interior node, by unknown index.
    Node(usize),
    /// A Dirichlet point: a boundary-row node or the interface crossing.
    Dirichlet { kind: BoundaryKind, x: f64, y: f64 },
}

/// A stencil leg of fractional length `theta` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub theta: f64,
    pub end: LegEnd,
}

/// Axis directions in the order legs are stored: east, west, north, south.
pub const AXES: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePoint {
    pub x: f64,
    pub y: f64,
    /// Unit normal pointing into this domain's phase.
    pub normal: [f64; 2],
}

/// Interior nodes of `D_f` (or `D_f^-`) with Shortley–Weller legs.
#[derive(Debug, Clone)]
pub struct CutCellDomain {
    phase: Phase,
    grid: PeriodicGrid,
    heights: Vec<f64>,
    /// Per node key: unknown index, or `usize::MAX` when not interior.
    index: Vec<usize>,
    nodes: Vec<(usize, usize)>,
    legs: Vec<[Leg; 4]>,
    interface_points: Vec<InterfacePoint>,
}

const NOT_INTERIOR: usize = usize::MAX;

/// Builds the cut-cell discretization of the phase domain bounded by `f`.
pub fn build_domain(f: &GraphInterface, phase: Phase) -> Result<CutCellDomain> {
    let bad = f.band_violations();
    if !bad.is_empty() {
        return Err(FbError::PhaseBand {
            t: None,
            columns: bad,
        });
    }
    if phase == Phase::Negative && !f.is_two_phase() {
        return Err(FbError::InvalidInput(
            "the negative phase needs a two-phase strip".into(),
        ));
    }
    let grid = *f.grid();
    let dy = grid.dy();
    let clearance = f.min().min(grid.height_cap() - f.max());
    if clearance < 2.0 * dy {
        return Err(FbError::ResolutionInsufficient {
            clearance,
            required: 2.0 * dy,
        });
    }

    let (n_x, n_y) = (grid.n_x(), grid.n_y());
    let mut index = vec![NOT_INTERIOR; grid.node_count()];
    let mut nodes = Vec::new();
    // Column-major numbering keeps each column's unknowns contiguous.
    for i in 0..n_x {
        for j in 1..n_y {
            if level(phase, f.values()[i], grid.y(j)) > 0.0 {
                index[grid.node_key(i, j)] = nodes.len();
                nodes.push((i, j));
            }
        }
    }

    let mut domain = CutCellDomain {
        phase,
        grid,
        heights: f.values().to_vec(),
        index,
        nodes,
        legs: Vec::new(),
        interface_points: Vec::new(),
    };
    domain.legs = (0..domain.nodes.len())
        .map(|p| {
            let (i, j) = domain.nodes[p];
            AXES.map(|(di, dj)| domain.leg(i, j, di, dj))
        })
        .collect();
    let sign = match phase {
        Phase::Positive => 1.0,
        Phase::Negative => -1.0,
    };
    domain.interface_points = (0..n_x)
        .map(|i| {
            let n = interface_normal(f, i);
            InterfacePoint {
                x: grid.x(i),
                y: f.values()[i],
                normal: [sign * n[0], sign * n[1]],
            }
        })
        .collect();
    Ok(domain)
}

/// Signed distance-like level: positive inside the phase.
fn level(phase: Phase, height: f64, y: f64) -> f64 {
    match phase {
        Phase::Positive => height - y,
        Phase::Negative => y - height,
    }
}

impl CutCellDomain {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Interface samples the domain was built from.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    /// `(i, j)` of unknown `p`.
    pub fn node(&self, p: usize) -> (usize, usize) {
        self.nodes[p]
    }

    pub fn nodes(&self) -> &[(usize, usize)] {
        &self.nodes
    }

    /// Unknown index of node `(i, j)` if it is interior.
    pub fn unknown(&self, i: usize, j: usize) -> Option<usize> {
        match self.index[self.grid.node_key(i, j)] {
            NOT_INTERIOR => None,
            p => Some(p),
        }
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.unknown(i, j).is_some()
    }

    /// Interior flag for every node key `j * n_x + i`.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.index.iter().map(|&p| p != NOT_INTERIOR).collect()
    }

    /// Axis legs (east, west, north, south) of unknown `p`.
    pub fn axis_legs(&self, p: usize) -> &[Leg; 4] {
        &self.legs[p]
    }

    pub fn interface_points(&self) -> &[InterfacePoint] {
        &self.interface_points
    }

    /// Row index of this phase's fixed boundary.
    pub fn boundary_row(&self) -> usize {
        match self.phase {
            Phase::Positive => 0,
            Phase::Negative => self.grid.n_y(),
        }
    }

    /// Interface height at `x` (linear between columns).
    pub fn height_at(&self, x: f64) -> f64 {
        let dx = self.grid.dx();
        let s = x.rem_euclid(self.grid.period()) / dx;
        let i0 = (s.floor() as usize).min(self.grid.n_x() - 1);
        let t = s - i0 as f64;
        let i1 = (i0 + 1) % self.grid.n_x();
        self.heights[i0] * (1.0 - t) + self.heights[i1] * t
    }

    /// Positive strictly inside the phase, zero on the interface.
    pub fn level_at(&self, x: f64, y: f64) -> f64 {
        level(self.phase, self.height_at(x), y)
    }

    /// True if `(x, y)` lies strictly inside the phase and the fixed rows.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        y > 0.0 && y < self.grid.height_cap() && self.level_at(x, y) > 0.0
    }

    fn node_level(&self, i: usize, j: usize) -> f64 {
        level(self.phase, self.heights[i], self.grid.y(j))
    }

    /// Leg from interior node `(i, j)` in lattice direction `(di, dj)`.
    ///
    /// The level function is linear along any lattice segment joining
    /// neighboring columns, so the crossing is found by linear interpolation.
    pub fn leg(&self, i: usize, j: usize, di: isize, dj: isize) -> Leg {
        let grid = &self.grid;
        let i1 = grid.wrap(i as isize + di);
        let j1 = (j as isize + dj) as usize;
        if let Some(q) = self.unknown(i1, j1) {
            return Leg {
                theta: 1.0,
                end: LegEnd::Node(q),
            };
        }
        if j1 == self.boundary_row() {
            let kind = match self.phase {
                Phase::Positive => BoundaryKind::Bottom,
                Phase::Negative => BoundaryKind::Top,
            };
            return Leg {
                theta: 1.0,
                end: LegEnd::Dirichlet {
                    kind,
                    x: grid.x(i1),
                    y: grid.y(j1),
                },
            };
        }
        let l0 = self.node_level(i, j);
        let l1 = self.node_level(i1, j1);
        debug_assert!(l0 > 0.0 && l1 <= 0.0);
        let theta = (l0 / (l0 - l1)).clamp(0.0, 1.0);
        let x = (grid.x(i) + theta * di as f64 * grid.dx()).rem_euclid(grid.period());
        let y = grid.y(j) + theta * dj as f64 * grid.dy();
        Leg {
            theta,
            end: LegEnd::Dirichlet {
                kind: BoundaryKind::Interface,
                x,
                y,
            },
        }
    }
}
