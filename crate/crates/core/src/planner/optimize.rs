//! Box-bounded derivative-free minimization: a rotated Halton sweep
//! followed by Nelder-Mead refinement from the best few samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::Exec;

use super::{ParamBounds, TrajectoryParams};

const DIM: usize = 4;
const PRIMES: [u32; DIM] = [2, 3, 5, 7];
/// Number of global candidates refined locally.
pub const LOCAL_STARTS: usize = 3;
pub const MIN_BUDGET: usize = 16;

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * inv;
        i /= b;
        inv /= base as f64;
    }
    out
}

/// `n` points of the Halton sequence in `[0,1)^4`, shifted modulo 1 by a
/// seed-dependent offset.
pub fn halton_points(n: usize, seed: u64) -> Vec<[f64; DIM]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; DIM] = std::array::from_fn(|_| rng.random::<f64>());
    (0..n)
        .map(|k| std::array::from_fn(|d| (radical_inverse(k as u64 + 1, PRIMES[d]) + shift[d]).fract()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeResult {
    pub z: TrajectoryParams,
    pub value: f64,
    /// Best value seen in the global phase.
    pub global_best: f64,
    pub evaluations: usize,
}

struct Unit<'a> {
    lo: [f64; DIM],
    span: [f64; DIM],
    f: &'a (dyn Fn(&TrajectoryParams) -> f64 + Sync),
}

impl Unit<'_> {
    fn to_params(&self, u: &[f64; DIM]) -> TrajectoryParams {
        TrajectoryParams::from_array(std::array::from_fn(|d| self.lo[d] + u[d].clamp(0.0, 1.0) * self.span[d]))
    }

    fn eval(&self, u: &[f64; DIM]) -> f64 {
        let v = (self.f)(&self.to_params(u));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn clip(u: [f64; DIM]) -> [f64; DIM] {
    u.map(|x| x.clamp(0.0, 1.0))
}

fn axpy(a: &[f64; DIM], s: f64, b: &[f64; DIM]) -> [f64; DIM] {
    std::array::from_fn(|d| a[d] + s * b[d])
}

fn sub(a: &[f64; DIM], b: &[f64; DIM]) -> [f64; DIM] {
    std::array::from_fn(|d| a[d] - b[d])
}

/// Nelder-Mead in the unit cube, projecting every trial point onto the
/// box. Returns the best vertex and its value.
fn nelder_mead(unit: &Unit<'_>, x0: [f64; DIM], f0: f64, step: f64, budget: usize) -> ([f64; DIM], f64) {
    let mut simplex: Vec<([f64; DIM], f64)> = vec![(x0, f0)];
    let mut used = 0;
    for d in 0..DIM {
        if used >= budget {
            break;
        }
        let mut x = x0;
        // step inward when near the upper face
        x[d] = if x0[d] + step <= 1.0 { x0[d] + step } else { x0[d] - step };
        let x = clip(x);
        simplex.push((x, unit.eval(&x)));
        used += 1;
    }
    if simplex.len() < DIM + 1 {
        return best_of(&simplex);
    }
    let order = |s: &mut Vec<([f64; DIM], f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    while used < budget {
        order(&mut simplex);
        let (best, worst) = (simplex[0].1, simplex[DIM].1);
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| sub(x, &simplex[0].0).iter().map(|v| v.abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-10 || (worst - best).abs() <= 1e-14 * best.abs().max(1e-300) && size < 1e-6 {
            break;
        }
        let mut centroid = [0.0; DIM];
        for (x, _) in &simplex[..DIM] {
            for d in 0..DIM {
                centroid[d] += x[d] / DIM as f64;
            }
        }
        let dir = sub(&centroid, &simplex[DIM].0);
        let xr = clip(axpy(&centroid, 1.0, &dir));
        let fr = unit.eval(&xr);
        used += 1;
        if fr < simplex[0].1 {
            if used < budget {
                let xe = clip(axpy(&centroid, 2.0, &dir));
                let fe = unit.eval(&xe);
                used += 1;
                simplex[DIM] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else {
                simplex[DIM] = (xr, fr);
            }
            continue;
        }
        if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (xr, fr);
            continue;
        }
        if used >= budget {
            break;
        }
        // contraction, outside or inside
        let (xc, fc) = if fr < simplex[DIM].1 {
            let xc = clip(axpy(&centroid, 0.5, &dir));
            (xc, unit.eval(&xc))
        } else {
            let xc = clip(axpy(&centroid, -0.5, &dir));
            (xc, unit.eval(&xc))
        };
        used += 1;
        if fc < simplex[DIM].1.min(fr) {
            simplex[DIM] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let b = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            if used >= budget {
                break;
            }
            let x = clip(axpy(&b, 0.5, &sub(&v.0, &b)));
            *v = (x, unit.eval(&x));
            used += 1;
        }
    }
    best_of(&simplex)
}

fn best_of(s: &[([f64; DIM], f64)]) -> ([f64; DIM], f64) {
    // first minimum wins
    s.iter().skip(1).fold(s[0], |acc, v| if v.1 < acc.1 { *v } else { acc })
}

/// Minimizes `f` over the box. The global phase evaluates `budget / 2`
/// rotated Halton points; the rest of the budget is split evenly across
/// Nelder-Mead runs from the best [`LOCAL_STARTS`] of them. The result is
/// the lowest value seen, ties going to the earliest evaluation.
pub fn optimize(
    f: &(dyn Fn(&TrajectoryParams) -> f64 + Sync),
    bounds: &ParamBounds,
    seed: u64,
    budget: usize,
    exec: Exec,
) -> OptimizeResult {
    optimize_with(f, bounds, seed, budget, &[], exec)
}

/// [`optimize`] with caller-supplied candidates (clamped into the box)
/// taking the first slots of the global phase.
pub fn optimize_with(
    f: &(dyn Fn(&TrajectoryParams) -> f64 + Sync),
    bounds: &ParamBounds,
    seed: u64,
    budget: usize,
    starts: &[TrajectoryParams],
    exec: Exec,
) -> OptimizeResult {
    let budget = budget.max(MIN_BUDGET);
    let lo = bounds.lower.to_array();
    let hi = bounds.upper.to_array();
    let unit = Unit {
        lo,
        span: std::array::from_fn(|d| (hi[d] - lo[d]).max(0.0)),
        f,
    };
    let n_global = budget / 2;
    let given = starts.len().min(n_global);
    let mut points: Vec<[f64; DIM]> = starts[..given]
        .iter()
        .map(|z| {
            let a = bounds.clamp(z).to_array();
            std::array::from_fn(|d| if unit.span[d] > 0.0 { (a[d] - lo[d]) / unit.span[d] } else { 0.0 })
        })
        .collect();
    points.extend(halton_points(n_global - given, seed));
    let values = exec.map_slice(&points, |u| unit.eval(u));

    let mut ranked: Vec<usize> = (0..n_global).collect();
    ranked.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let global_best = values[ranked[0]];
    let starts: Vec<usize> = ranked.into_iter().take(LOCAL_STARTS).collect();

    let per_start = (budget - n_global) / starts.len();
    // initial simplex edge near the Halton spacing
    let step = 0.5 * (n_global as f64).powf(-1.0 / DIM as f64);
    let local = exec.map_slice(&starts, |&i| nelder_mead(&unit, points[i], values[i], step, per_start));

    let mut best = (points[starts[0]], global_best);
    for (x, v) in local {
        if v < best.1 {
            best = (x, v);
        }
    }
    OptimizeResult {
        z: unit.to_params(&best.0),
        value: best.1,
        global_best,
        evaluations: n_global + per_start * starts.len(),
    }
}
