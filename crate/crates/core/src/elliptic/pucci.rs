//! Pucci extremal operators and their policy-iteration solve.
//!
//! The discrete operator is
//!
//! ```text
//! M+_h u = lambda * L_h u + (Lambda - lambda) * max_S sum_{v in S} D_v u
//! M-_h u = lambda * L_h u + (Lambda - lambda) * min_S sum_{v in S} D_v u
//! ```
//!
//! where `L_h` is the five-point Shortley–Weller Laplacian, `D_v` the cut-cell
//! second difference along `v in {e1, e2, (e1+e2), (e1-e2)}` and `S` ranges
//! over direction sets with `sum v v^T <= Id`. Each fixed choice of `S` per
//! node is a monotone linear operator, and `M-_h <= L_h <= M+_h` holds
//! whenever `lambda == 1`.

use super::{
    collapsed_value, second_difference, solve_linear, BoundaryData, BulkField,
    EllipticOperatorSpec, OperatorKind, RowAccumulator, SystemBuilder,
};
use crate::error::{FbError, Result};
use crate::geometry::{CutCellDomain, Leg};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PucciSign {
    Plus,
    Minus,
}

/// Pucci operator from Hessian eigenvalues.
pub fn pucci_eval(eigs: &[f64], lambda: f64, big_lambda: f64, sign: PucciSign) -> f64 {
    let neg: f64 = eigs.iter().filter(|&&e| e <= 0.0).sum();
    let pos: f64 = eigs.iter().filter(|&&e| e > 0.0).sum();
    match sign {
        PucciSign::Plus => lambda * neg + big_lambda * pos,
        PucciSign::Minus => big_lambda * neg + lambda * pos,
    }
}

const MAX_POLICY_ITERATIONS: usize = 60;

/// Bit sets over `[e1, e2, d+, d-]`; the last only when `dx == dy`.
const SUBSETS: [u8; 7] = [0b0000, 0b0001, 0b0010, 0b0011, 0b0100, 0b1000, 0b1100];

/// The eight legs of a node: `e1+, e1-, e2+, e2-, d++, d+-, d-+, d--`.
struct NodeLegs {
    legs: [Leg; 8],
}

struct Stencils {
    nodes: Vec<NodeLegs>,
    steps: [f64; 4],
    subsets: &'static [u8],
}

impl Stencils {
    fn new(domain: &CutCellDomain) -> Self {
        let g = domain.grid();
        let (dx, dy) = (g.dx(), g.dy());
        let diag = dx.hypot(dy);
        let nodes = domain
            .nodes()
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| {
                let a = domain.axis_legs(p);
                NodeLegs {
                    legs: [
                        a[0],
                        a[1],
                        a[2],
                        a[3],
                        domain.leg(i, j, 1, 1),
                        domain.leg(i, j, -1, -1),
                        domain.leg(i, j, 1, -1),
                        domain.leg(i, j, -1, 1),
                    ],
                }
            })
            .collect();
        let isotropic = (dx - dy).abs() <= 1e-12 * dx;
        Self {
            nodes,
            steps: [dx, dy, diag, diag],
            subsets: if isotropic { &SUBSETS } else { &SUBSETS[..6] },
        }
    }

    /// Second differences `[D_e1, D_e2, D_d+, D_d-]` at unknown `p`.
    fn differences(&self, p: usize, u: &[f64], bc: &BoundaryData) -> [f64; 4] {
        let l = &self.nodes[p].legs;
        std::array::from_fn(|k| second_difference(u, u[p], self.steps[k], &l[2 * k], &l[2 * k + 1], bc))
    }

    /// Diagonal of the `lambda`-weighted Laplacian row, used to scale residuals.
    fn laplace_diag(&self, p: usize, lambda: f64) -> f64 {
        let l = &self.nodes[p].legs;
        lambda
            * (2.0 / (self.steps[0].powi(2) * l[0].theta * l[1].theta)
                + 2.0 / (self.steps[1].powi(2) * l[2].theta * l[3].theta))
    }
}

fn subset_value(set: u8, d: &[f64; 4]) -> f64 {
    (0..4).filter(|k| set & (1 << k) != 0).map(|k| d[k]).sum()
}

fn sign_of(spec: &EllipticOperatorSpec) -> PucciSign {
    match spec.kind {
        OperatorKind::PucciMinus => PucciSign::Minus,
        _ => PucciSign::Plus,
    }
}

/// Extremal subset for the current differences, keeping `current` unless another set
/// improves on it by more than `slack`.
fn best_subset(subsets: &[u8], d: &[f64; 4], sign: PucciSign, current: u8, slack: f64) -> (u8, f64) {
    let cur = subset_value(current, d);
    let (mut best, mut val) = (current, cur);
    for &s in subsets {
        let v = subset_value(s, d);
        let better = match sign {
            PucciSign::Plus => v > val,
            PucciSign::Minus => v < val,
        };
        if better {
            best = s;
            val = v;
        }
    }
    if (val - cur).abs() <= slack {
        (current, cur)
    } else {
        (best, val)
    }
}

/// Max over interior nodes of `|F_h(u)| / diag`, for any operator kind.
pub fn discrete_operator_residual(
    domain: &CutCellDomain,
    spec: &EllipticOperatorSpec,
    bc: &BoundaryData,
    u: &[f64],
) -> f64 {
    let st = Stencils::new(domain);
    let sign = sign_of(spec);
    let mut worst: f64 = 0.0;
    for p in 0..domain.unknowns() {
        if let Some(v) = collapsed_value(&st.nodes[p].legs, bc) {
            worst = worst.max((u[p] - v).abs());
            continue;
        }
        let d = st.differences(p, u, bc);
        let extra = match spec.kind {
            OperatorKind::Laplace => 0.0,
            _ => best_subset(st.subsets, &d, sign, 0, 0.0).1,
        };
        let f = spec.lambda * (d[0] + d[1]) + (spec.big_lambda - spec.lambda) * extra;
        worst = worst.max(f.abs() / st.laplace_diag(p, spec.lambda));
    }
    worst
}

pub(super) fn solve_pucci(
    domain: &CutCellDomain,
    spec: &EllipticOperatorSpec,
    bc: &BoundaryData,
    tol: f64,
) -> Result<BulkField> {
    let st = Stencils::new(domain);
    let sign = sign_of(spec);
    let (lam, extra_w) = (spec.lambda, spec.big_lambda - spec.lambda);
    let n = domain.unknowns();
    let collapsed: Vec<Option<f64>> = st.nodes.iter().map(|nl| collapsed_value(&nl.legs, bc)).collect();
    let mut policy = vec![0u8; n];
    let mut history = Vec::new();
    let mut row = RowAccumulator::default();
    let mut linear_iterations = 0;

    for _ in 0..MAX_POLICY_ITERATIONS {
        let mut builder = SystemBuilder::with_capacity(n);
        for p in 0..n {
            if let Some(v) = collapsed[p] {
                builder.push_collapsed(v);
                continue;
            }
            let l = &st.nodes[p].legs;
            row.clear();
            for k in 0..4 {
                let mut w = if k < 2 { lam } else { 0.0 };
                if policy[p] & (1 << k) != 0 {
                    w += extra_w;
                }
                row.add_direction(w, st.steps[k], &l[2 * k], &l[2 * k + 1], bc);
            }
            builder.push_row(row.diag, &row.off, row.rhs);
        }
        let system = builder.finish(bc.clone());
        let field = solve_linear(&system, 0.1 * tol)?;
        linear_iterations += field.iterations;

        let mut residual: f64 = 0.0;
        let mut changed = false;
        for p in 0..n {
            if collapsed[p].is_some() {
                continue;
            }
            let d = st.differences(p, &field.values, bc);
            let scale = st.laplace_diag(p, lam);
            let (s, v) = best_subset(st.subsets, &d, sign, policy[p], 0.01 * tol * scale / extra_w);
            let f = lam * (d[0] + d[1]) + extra_w * v;
            residual = residual.max(f.abs() / scale);
            if s != policy[p] {
                policy[p] = s;
                changed = true;
            }
        }
        history.push(residual);
        if residual <= tol {
            return Ok(BulkField {
                residual,
                iterations: linear_iterations,
                ..field
            });
        }
        if !changed {
            break;
        }
    }
    Err(FbError::PolicyIteration { history })
}
