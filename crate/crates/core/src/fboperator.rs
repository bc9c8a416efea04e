//! Free boundary operators `I`, `I^+`, `I^-`, `H` and the interface velocity.
//!
//! Each operator is one bulk solve followed by a one-sided normal difference
//! at every column point `X0 = (x_i, f_i)`. Probe points `X0 + k h n` are
//! read from the bulk field by bilinear interpolation; lattice corners outside
//! the phase contribute their Dirichlet value. With the order-1 probe every
//! flux is a non-negative combination of nodal values, so the discrete
//! operator inherits the comparison principle of the bulk scheme.

use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_bulk, BoundaryData, BulkField, EllipticOperatorSpec};
use crate::error::{FbError, Result};
use crate::geometry::{build_domain, graph_gradient, CutCellDomain, GraphInterface, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ProbeOrder {
    /// `U(X0 + h n) / h`; monotone in `U`.
    First,
    /// `(4 U(X0 + h n) - U(X0 + 2 h n)) / (2 h)`.
    Second,
}

impl TryFrom<u8> for ProbeOrder {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(format!("probe order must be 1 or 2, got {v}")),
        }
    }
}

impl From<ProbeOrder> for u8 {
    fn from(o: ProbeOrder) -> u8 {
        match o {
            ProbeOrder::First => 1,
            ProbeOrder::Second => 2,
        }
    }
}

/// Probe and solver settings shared by all flux evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxOptions {
    pub order: ProbeOrder,
    /// Bulk residual target; also the slack for sign checks.
    pub tol: f64,
    /// Probe step; `None` means `min(dx, dy)`.
    pub step: Option<f64>,
}

impl Default for FluxOptions {
    fn default() -> Self {
        Self {
            order: ProbeOrder::Second,
            tol: crate::elliptic::DEFAULT_TOL,
            step: None,
        }
    }
}

impl FluxOptions {
    pub fn first_order(tol: f64) -> Self {
        Self {
            order: ProbeOrder::First,
            tol,
            step: None,
        }
    }

    pub fn second_order(tol: f64) -> Self {
        Self {
            order: ProbeOrder::Second,
            tol,
            step: None,
        }
    }
}

/// One-sided normal derivatives along the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceFluxes {
    pub i_plus: Vec<f64>,
    pub i_minus: Option<Vec<f64>>,
    pub order: ProbeOrder,
    /// Columns where the second probe point left the phase and the order-1
    /// value was used instead.
    pub clipped: Vec<usize>,
}

/// Bulk solve for one phase of `f` with the free boundary data.
pub fn solve_phase(
    f: &GraphInterface,
    phase: Phase,
    spec: &EllipticOperatorSpec,
    tol: f64,
) -> Result<(CutCellDomain, BulkField)> {
    let domain = build_domain(f, phase)?;
    let field = solve_bulk(&domain, spec, &BoundaryData::free_boundary(phase), tol)?;
    Ok((domain, field))
}

/// Bilinear interpolation of the nodal field (exterior corners carry their
/// Dirichlet value). `x` is taken modulo the period.
pub fn interpolate_field(field: &BulkField, domain: &CutCellDomain, x: f64, y: f64) -> f64 {
    let grid = domain.grid();
    let sx = x.rem_euclid(grid.period()) / grid.dx();
    let sy = (y / grid.dy()).clamp(0.0, grid.n_y() as f64);
    let i0 = (sx.floor() as usize).min(grid.n_x() - 1);
    let j0 = (sy.floor() as usize).min(grid.n_y() - 1);
    let (tx, ty) = (sx - i0 as f64, sy - j0 as f64);
    let i1 = (i0 + 1) % grid.n_x();
    let v = |i, j| field.node_value(domain, i, j);
    (1.0 - ty) * ((1.0 - tx) * v(i0, j0) + tx * v(i1, j0))
        + ty * ((1.0 - tx) * v(i0, j0 + 1) + tx * v(i1, j0 + 1))
}

fn inside_for_probe(domain: &CutCellDomain, x: f64, y: f64) -> bool {
    y >= 0.0 && y <= domain.grid().height_cap() && domain.level_at(x, y) > 0.0
}

/// `d U / d n` at column `i` along the domain's inward normal.
///
/// Returns the raw derivative of the field; for the negative phase (where
/// `U <= 0`) this is non-positive and callers negate it. The second return
/// value is true when order 2 fell back to order 1.
pub fn normal_derivative_probe(
    field: &BulkField,
    domain: &CutCellDomain,
    i: usize,
    order: ProbeOrder,
    step: Option<f64>,
) -> Result<(f64, bool)> {
    let h = step.unwrap_or(domain.grid().h_min());
    let p = domain.interface_points()[i];
    let at = |k: f64| (p.x + k * h * p.normal[0], p.y + k * h * p.normal[1]);
    let (x1, y1) = at(1.0);
    if !inside_for_probe(domain, x1, y1) {
        return Err(FbError::ProbeOutOfPhase { column: i });
    }
    let u1 = interpolate_field(field, domain, x1, y1);
    if order == ProbeOrder::First {
        return Ok((u1 / h, false));
    }
    let (x2, y2) = at(2.0);
    if !inside_for_probe(domain, x2, y2) {
        return Ok((u1 / h, true));
    }
    let u2 = interpolate_field(field, domain, x2, y2);
    Ok(((4.0 * u1 - u2) / (2.0 * h), false))
}

fn probe_all(
    field: &BulkField,
    domain: &CutCellDomain,
    opts: &FluxOptions,
    sign: f64,
    clipped: &mut Vec<usize>,
) -> Result<Vec<f64>> {
    let n = domain.grid().n_x();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (d, fell_back) = normal_derivative_probe(field, domain, i, opts.order, opts.step)?;
        if fell_back {
            clipped.push(i);
        }
        out.push(sign * d);
    }
    Ok(out)
}

/// `I^+` values from an already solved positive-phase field.
pub fn fluxes_from_field(
    field: &BulkField,
    domain: &CutCellDomain,
    opts: &FluxOptions,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let sign = match domain.phase() {
        Phase::Positive => 1.0,
        Phase::Negative => -1.0,
    };
    let mut clipped = Vec::new();
    let v = probe_all(field, domain, opts, sign, &mut clipped)?;
    Ok((v, clipped))
}

/// One-phase operator `I(f)`: bulk data 1 on the bottom, 0 on the graph.
pub fn op_i(f: &GraphInterface, spec: &EllipticOperatorSpec, opts: &FluxOptions) -> Result<InterfaceFluxes> {
    let (domain, field) = solve_phase(f, Phase::Positive, spec, opts.tol)?;
    let (i_plus, clipped) = fluxes_from_field(&field, &domain, opts)?;
    Ok(InterfaceFluxes {
        i_plus,
        i_minus: None,
        order: opts.order,
        clipped,
    })
}

/// Two-phase `I^-(f)`: data 0 on the graph, -1 on the top, reported as the
/// non-negative derivative into the upper phase.
pub fn op_i_minus(f: &GraphInterface, spec: &EllipticOperatorSpec, opts: &FluxOptions) -> Result<Vec<f64>> {
    let (domain, field) = solve_phase(f, Phase::Negative, spec, opts.tol)?;
    Ok(fluxes_from_field(&field, &domain, opts)?.0)
}

/// Both one-sided fluxes of a two-phase configuration; the solves run in parallel.
pub fn two_phase_fluxes(
    f: &GraphInterface,
    spec_plus: &EllipticOperatorSpec,
    spec_minus: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<InterfaceFluxes> {
    if !f.is_two_phase() {
        return Err(FbError::InvalidInput(
            "two-phase fluxes need a two-phase strip".into(),
        ));
    }
    let (plus, minus) = rayon::join(
        || -> Result<_> {
            let (d, u) = solve_phase(f, Phase::Positive, spec_plus, opts.tol)?;
            fluxes_from_field(&u, &d, opts)
        },
        || -> Result<_> {
            let (d, u) = solve_phase(f, Phase::Negative, spec_minus, opts.tol)?;
            fluxes_from_field(&u, &d, opts)
        },
    );
    let (i_plus, mut clipped) = plus?;
    let (i_minus, c2) = minus?;
    clipped.extend(c2);
    clipped.sort_unstable();
    clipped.dedup();
    Ok(InterfaceFluxes {
        i_plus,
        i_minus: Some(i_minus),
        order: opts.order,
        clipped,
    })
}

/// Fluxes for whichever configuration `f` describes.
pub fn interface_fluxes(
    f: &GraphInterface,
    spec_plus: &EllipticOperatorSpec,
    spec_minus: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<InterfaceFluxes> {
    if f.is_two_phase() {
        two_phase_fluxes(f, spec_plus, spec_minus, opts)
    } else {
        op_i(f, spec_plus, opts)
    }
}

/// `H(f)_i = G(I^+_i, I^-_i)`.
pub fn op_h(
    f: &GraphInterface,
    law: &VelocityLaw,
    spec_plus: &EllipticOperatorSpec,
    spec_minus: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<Vec<f64>> {
    if law.arity() != Arity::TwoPhase {
        return Err(FbError::InvalidInput("H needs a two-phase velocity law".into()));
    }
    let fl = two_phase_fluxes(f, spec_plus, spec_minus, opts)?;
    law.apply(&fl, opts.tol)
}

/// Normal velocity expressed as `d f / d t`: `G(I^+, I^-) * sqrt(1 + f'^2)`.
pub fn interface_velocity(f: &GraphInterface, law: &VelocityLaw, fluxes: &InterfaceFluxes, tol: f64) -> Result<Vec<f64>> {
    let g = law.apply(fluxes, tol)?;
    Ok(graph_gradient(f)
        .iter()
        .zip(g)
        .map(|(s, v)| v * (1.0 + s * s).sqrt())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    OnePhase,
    TwoPhase,
}

/// Evaluation rule of a velocity law.
///
/// One-phase laws are `g(a) = r(a)`; two-phase laws are `G(a, b) = r(a) - r(b)`.
#[derive(Debug, Clone, PartialEq)]
pub enum LawRule {
    /// `r(a) = a`.
    Identity,
    /// `r(a) = a^2`.
    Squares,
    /// Piecewise-linear `r` through increasing knots, extended linearly by the end segments.
    Table(Vec<(f64, f64)>),
}

impl LawRule {
    fn eval(&self, a: f64) -> f64 {
        match self {
            LawRule::Identity => a,
            LawRule::Squares => a * a,
            LawRule::Table(knots) => {
                let k = knots
                    .partition_point(|&(x, _)| x <= a)
                    .clamp(1, knots.len() - 1);
                let (x0, y0) = knots[k - 1];
                let (x1, y1) = knots[k];
                y0 + (y1 - y0) * (a - x0) / (x1 - x0)
            }
        }
    }
}

/// Balance law `g(a)` or `G(a, b)` with declared monotonicity bounds.
///
/// The declaration covers the probe range `[a_min, a_max]`: secant slopes of
/// `G` in `a` (and of `-G` in `b`) lie in `[lambda0, big_lambda0]` there.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityLaw {
    arity: Arity,
    rule: LawRule,
    lambda0: f64,
    big_lambda0: f64,
    range: (f64, f64),
}

/// Lattice size used to validate declared monotonicity.
const LAW_LATTICE: usize = 65;

/// Default probe range for flux values.
pub const DEFAULT_LAW_RANGE: (f64, f64) = (0.05, 20.0);

impl VelocityLaw {
    pub fn new(arity: Arity, rule: LawRule, lambda0: f64, big_lambda0: f64, range: (f64, f64)) -> Result<Self> {
        if let LawRule::Table(k) = &rule {
            if k.len() < 2 || k.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(FbError::InvalidInput(
                    "table needs at least two knots with increasing abscissae".into(),
                ));
            }
            if k.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
                return Err(FbError::InvalidInput("table knots must be finite".into()));
            }
        }
        if !(lambda0 > 0.0 && big_lambda0 >= lambda0 && big_lambda0.is_finite()) {
            return Err(FbError::InvalidInput(format!(
                "need 0 < lambda0 <= Lambda0, got {lambda0}, {big_lambda0}"
            )));
        }
        if !(range.0 > 0.0 && range.1 > range.0 && range.1.is_finite()) {
            return Err(FbError::InvalidInput(format!("bad probe range {range:?}")));
        }
        let law = Self {
            arity,
            rule,
            lambda0,
            big_lambda0,
            range,
        };
        law.validate(1e-9)?;
        Ok(law)
    }

    /// `g(a) = a` or `G(a, b) = a - b`.
    pub fn identity(arity: Arity) -> Self {
        Self::new(arity, LawRule::Identity, 1.0, 1.0, DEFAULT_LAW_RANGE).expect("identity law")
    }

    /// `g(a) = a^2` or `G(a, b) = a^2 - b^2`, bounds `2 a` over the default range.
    pub fn squares(arity: Arity) -> Self {
        let (lo, hi) = DEFAULT_LAW_RANGE;
        Self::new(arity, LawRule::Squares, 2.0 * lo, 2.0 * hi, DEFAULT_LAW_RANGE).expect("squares law")
    }

    /// Piecewise-linear table with bounds taken from its slopes.
    pub fn table(arity: Arity, knots: Vec<(f64, f64)>) -> Result<Self> {
        let slopes: Vec<f64> = knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo > 0.0) {
            return Err(FbError::NonMonotoneLaw(format!(
                "table slopes must be positive, smallest is {lo}"
            )));
        }
        Self::new(arity, LawRule::Table(knots), lo, hi, DEFAULT_LAW_RANGE)
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn rule(&self) -> &LawRule {
        &self.rule
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn big_lambda0(&self) -> f64 {
        self.big_lambda0
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// `g(a)`, or `G(a, b)` when `b` is given.
    pub fn eval(&self, a: f64, b: Option<f64>) -> f64 {
        let r = self.rule.eval(a);
        match b {
            Some(b) => r - self.rule.eval(b),
            None => r,
        }
    }

    /// Checks the declared bounds on secant slopes over a lattice of the probe range.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let (lo, hi) = self.range;
        let pts: Vec<f64> = (0..LAW_LATTICE)
            .map(|k| lo + (hi - lo) * k as f64 / (LAW_LATTICE - 1) as f64)
            .collect();
        let check = |s: f64, what: &str, a: f64, b: f64| -> Result<()> {
            if s < self.lambda0 - tol || s > self.big_lambda0 + tol {
                return Err(FbError::NonMonotoneLaw(format!(
                    "{what} = {s} on [{a}, {b}] outside [{}, {}]",
                    self.lambda0, self.big_lambda0
                )));
            }
            Ok(())
        };
        let bs: Vec<Option<f64>> = match self.arity {
            Arity::OnePhase => vec![None],
            Arity::TwoPhase => pts.iter().map(|&b| Some(b)).collect(),
        };
        for &b in &bs {
            for w in pts.windows(2) {
                let s = (self.eval(w[1], b) - self.eval(w[0], b)) / (w[1] - w[0]);
                check(s, "dG/da", w[0], w[1])?;
            }
        }
        if self.arity == Arity::TwoPhase {
            for &a in &pts {
                for w in pts.windows(2) {
                    let s = -(self.eval(a, Some(w[1])) - self.eval(a, Some(w[0]))) / (w[1] - w[0]);
                    check(s, "-dG/db", w[0], w[1])?;
                }
            }
        }
        Ok(())
    }

    /// Column-wise law values; fluxes must be positive up to `tol`.
    pub fn apply(&self, fluxes: &InterfaceFluxes, tol: f64) -> Result<Vec<f64>> {
        let minus = match (self.arity, &fluxes.i_minus) {
            (Arity::OnePhase, _) => None,
            (Arity::TwoPhase, Some(m)) => Some(m),
            (Arity::TwoPhase, None) => {
                return Err(FbError::InvalidInput(
                    "two-phase law applied to one-phase fluxes".into(),
                ))
            }
        };
        let out_of_domain = |v: f64| !(v + tol > 0.0);
        fluxes
            .i_plus
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let b = minus.map(|m| m[i]);
                if out_of_domain(a) || b.is_some_and(out_of_domain) {
                    return Err(FbError::LawDomain { column: i, a, b });
                }
                Ok(self.eval(a, b))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PeriodicGrid;
    use std::f64::consts::PI;

    fn flat(c: f64, two_phase: bool, cap: f64) -> GraphInterface {
        let g = PeriodicGrid::new(16, 30, 1.0, cap).unwrap();
        GraphInterface::new(g, vec![c; 16], 0.05, two_phase).unwrap()
    }

    #[test]
    fn flat_one_phase_fluxes() {
        for (c, want) in [(0.5, 2.0), (1.0, 1.0)] {
            let f = flat(c, false, 3.0);
            for order in [ProbeOrder::First, ProbeOrder::Second] {
                let opts = FluxOptions { order, tol: 1e-12, step: None };
                let fl = op_i(&f, &EllipticOperatorSpec::laplace(), &opts).unwrap();
                assert!(fl.clipped.is_empty());
                for v in fl.i_plus {
                    assert!((v - want).abs() < 1e-9, "{v}");
                }
            }
        }
    }

    #[test]
    fn flat_two_phase_fluxes_and_h() {
        let f = flat(1.0, true, 3.0);
        let lap = EllipticOperatorSpec::laplace();
        let opts = FluxOptions::second_order(1e-12);
        for v in op_i_minus(&f, &lap, &opts).unwrap() {
            assert!((v - 0.5).abs() < 1e-9);
        }
        let cases = [(VelocityLaw::identity(Arity::TwoPhase), 0.5), (VelocityLaw::squares(Arity::TwoPhase), 0.75)];
        for (law, want) in cases {
            for v in op_h(&f, &law, &lap, &lap, &opts).unwrap() {
                assert!((v - want).abs() < 1e-9);
            }
        }
        let mid = flat(1.5, true, 3.0);
        let fl = two_phase_fluxes(&mid, &lap, &lap, &opts).unwrap();
        for (a, b) in fl.i_plus.iter().zip(fl.i_minus.as_ref().unwrap()) {
            assert!((a - 2.0 / 3.0).abs() < 1e-9 && (b - 2.0 / 3.0).abs() < 1e-9);
        }
        for v in op_h(&mid, &VelocityLaw::squares(Arity::TwoPhase), &lap, &lap, &opts).unwrap() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn flat_velocity_has_unit_gradient_factor() {
        let f = flat(0.8, false, 3.0);
        let law = VelocityLaw::identity(Arity::OnePhase);
        let opts = FluxOptions::default();
        let fl = op_i(&f, &EllipticOperatorSpec::laplace(), &opts).unwrap();
        let v = interface_velocity(&f, &law, &fl, opts.tol).unwrap();
        for (r, a) in v.iter().zip(&fl.i_plus) {
            assert_eq!(r, a);
        }
    }

    #[test]
    fn gradient_factor_matches_analytic_slope() {
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = PeriodicGrid::isotropic(n, n / 2, 2.0 * PI).unwrap();
            let f = GraphInterface::from_fn(g, 0.1, false, |x| 1.5 + 0.3 * x.sin()).unwrap();
            let fl = InterfaceFluxes {
                i_plus: vec![1.0; n],
                i_minus: None,
                order: ProbeOrder::Second,
                clipped: vec![],
            };
            let v = interface_velocity(&f, &VelocityLaw::identity(Arity::OnePhase), &fl, 0.0).unwrap();
            let e = (0..n)
                .map(|i| (v[i] - (1.0 + (0.3 * g.x(i).cos()).powi(2)).sqrt()).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[0] / errs[1] > 3.5);
    }

    #[test]
    fn one_mode_matches_first_order_prediction() {
        let g = PeriodicGrid::isotropic(128, 96, 2.0 * PI).unwrap();
        let f = GraphInterface::from_fn(g, 0.1, false, |x| 1.0 + 0.05 * x.cos()).unwrap();
        let fl = op_i(&f, &EllipticOperatorSpec::laplace(), &FluxOptions::default()).unwrap();
        let m = 1.0 / 1f64.tanh();
        let dev = (0..128)
            .map(|i| (fl.i_plus[i] - (1.0 - 0.05 * m * g.x(i).cos())).abs())
            .fold(0.0, f64::max);
        assert!(dev < 5e-3, "{dev}");
    }

    #[test]
    fn reflection_identity() {
        let g = PeriodicGrid::isotropic(64, 48, 2.0 * PI).unwrap();
        let l = g.height_cap();
        let f = GraphInterface::from_fn(g, 0.2, true, |x| 0.5 * l + 0.4 * x.sin() + 0.2 * (2.0 * x).cos()).unwrap();
        let lap = EllipticOperatorSpec::laplace();
        let opts = FluxOptions::second_order(1e-12);
        let direct = op_i_minus(&f, &lap, &opts).unwrap();
        let mirrored: Vec<f64> = f.values().iter().map(|v| l - v).collect();
        let one = GraphInterface::one_phase(g, mirrored, 0.2).unwrap().reflected();
        let via = op_i(&one, &lap, &opts).unwrap().i_plus;
        for i in 0..64 {
            let j = g.wrap(-(i as isize));
            assert!((direct[i] - via[j]).abs() < 1e-9, "{} vs {}", direct[i], via[j]);
        }
    }

    #[test]
    fn law_domain_and_validation() {
        let law = VelocityLaw::identity(Arity::TwoPhase);
        let fl = InterfaceFluxes {
            i_plus: vec![1.0, -0.5],
            i_minus: Some(vec![0.5, 0.5]),
            order: ProbeOrder::First,
            clipped: vec![],
        };
        assert!(matches!(law.apply(&fl, 1e-9), Err(FbError::LawDomain { column: 1, .. })));
        assert!(VelocityLaw::table(Arity::OnePhase, vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
        let t = VelocityLaw::table(Arity::TwoPhase, vec![(0.0, 0.0), (1.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!((t.lambda0(), t.big_lambda0()), (0.5, 2.0));
        assert_eq!(t.eval(5.0, Some(1.0)), 4.0 - 2.0);
        assert!(VelocityLaw::new(Arity::OnePhase, LawRule::Squares, 1.0, 2.0, (0.05, 20.0)).is_err());
    }

    #[test]
    fn probe_order_serde() {
        assert_eq!(serde_json::to_string(&ProbeOrder::Second).unwrap(), "2");
        assert_eq!(serde_json::from_str::<ProbeOrder>("1").unwrap(), ProbeOrder::First);
        assert!(serde_json::from_str::<ProbeOrder>("3").is_err());
    }
}
