//! Flat norm as a linear program over a finite cubical complex, fractional
//! decomposition costs, deformation of chains onto a coarser grid, and the
//! explicit two-sided geometric-series constant for multiscale tail bounds.
//!
//! The flat norm computed here is the complex-restricted quantity
//! `min { M(S) + M(T - ∂S) }` over `(m+1)`-chains `S` supported in a finite
//! padded box. It is an upper bound for the unrestricted infimum and
//! stabilizes once the box contains the convex hull of the support with one
//! cell of padding.

use serde::{Deserialize, Serialize};

use crate::grid::{
    boundary, mass, pow2, simplicial_boundary, simplicial_mass, Chain, CubicalChain,
    Decomposition, DyadicFace, SimplicialChain,
};
use crate::{precondition, Error, Result};

/// Solver tolerance on reduced costs, relative to the largest objective
/// coefficient.
pub const LP_TOL: f64 = 1e-9;

/// A finite axis-aligned box of grid cells hosting the flat-norm program.
/// `lo`/`hi` are cell indices at `level` (`hi` exclusive).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexDomain {
    pub d: usize,
    pub level: i32,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl ComplexDomain {
    pub fn new(d: usize, level: i32, lo: Vec<i64>, hi: Vec<i64>) -> Self {
        assert_eq!(lo.len(), d);
        assert_eq!(hi.len(), d);
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b));
        ComplexDomain { d, level, lo, hi }
    }

    /// Bounding box of `chain` padded by `pad` cells on every side.
    pub fn padded_cover(chain: &CubicalChain, pad: i64) -> Result<Self> {
        assert!(pad >= 1, "padding must be at least one cell");
        let (lo, hi) = chain
            .bbox()
            .ok_or_else(|| precondition("cannot build a domain around the zero chain"))?;
        let lo: Vec<i64> = lo.iter().map(|&x| x - pad).collect();
        let hi: Vec<i64> = hi.iter().map(|&x| x + pad).collect();
        Ok(ComplexDomain::new(chain.d, chain.level, lo, hi))
    }

    /// Grow the box by `pad` cells on every side.
    pub fn grown(&self, pad: i64) -> Self {
        ComplexDomain::new(
            self.d,
            self.level,
            self.lo.iter().map(|&x| x - pad).collect(),
            self.hi.iter().map(|&x| x + pad).collect(),
        )
    }

    fn contains_face(&self, f: &DyadicFace) -> bool {
        (0..self.d).all(|i| {
            let ext = if f.axes.contains(&(i as u8)) { 1 } else { 0 };
            f.base[i] >= self.lo[i] && f.base[i] + ext <= self.hi[i]
        })
    }

    /// All degree-`m` faces inside the box, in a deterministic order.
    pub fn faces(&self, m: usize) -> Vec<DyadicFace> {
        let mut out = Vec::new();
        for axes in axis_subsets(self.d, m) {
            let idx0: Vec<i64> = self.lo.clone();
            let max: Vec<i64> = (0..self.d)
                .map(|i| if axes.contains(&(i as u8)) { self.hi[i] - 1 } else { self.hi[i] })
                .collect();
            if (0..self.d).any(|i| idx0[i] > max[i]) {
                continue;
            }
            let mut idx = idx0;
            'outer: loop {
                out.push(DyadicFace::new(idx.clone(), axes.clone()));
                for i in 0..self.d {
                    idx[i] += 1;
                    if idx[i] <= max[i] {
                        continue 'outer;
                    }
                    idx[i] = self.lo[i];
                }
                break;
            }
        }
        out
    }
}

pub(crate) fn axis_subsets(d: usize, m: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for mask in 0..(1u32 << d) {
        if mask.count_ones() as usize == m {
            out.push((0..d as u8).filter(|&i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

/// Outcome of a flat-norm solve: the optimum, a minimizing filling `S`, the
/// residual `T - ∂S`, and solver diagnostics.
#[derive(Clone, Debug)]
pub struct FlatNormResult {
    pub value: f64,
    pub witness_s: CubicalChain,
    pub residual: CubicalChain,
    pub iterations: usize,
    pub optimality_gap: f64,
}

/// Flat norm of `T` over `domain`, by linear programming. `T` is refined to
/// the domain level if coarser.
pub fn flat_norm(t: &CubicalChain, domain: &ComplexDomain) -> Result<FlatNormResult> {
    if t.level > domain.level {
        return Err(precondition(format!(
            "chain level {} finer than domain level {}",
            t.level, domain.level
        )));
    }
    let t = crate::grid::refine(t, domain.level)?;
    for f in t.terms.keys() {
        if !domain.contains_face(f) {
            return Err(precondition("chain support escapes the domain"));
        }
    }
    let m = t.m;
    let rows_faces = domain.faces(m);
    let col_faces = if m + 1 <= domain.d { domain.faces(m + 1) } else { Vec::new() };
    let nr = rows_faces.len();
    let ns = col_faces.len();

    let mut row_of = std::collections::HashMap::with_capacity(nr);
    for (i, f) in rows_faces.iter().enumerate() {
        row_of.insert(f.clone(), i);
    }

    // boundary columns: per (m+1)-face, its m-faces with signs
    let mut bcols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(ns);
    for g in &col_faces {
        let single = CubicalChain::from_terms(domain.d, m + 1, domain.level, [(g.clone(), 1.0)]);
        let b = boundary(&single)?;
        let col = b
            .terms
            .iter()
            .map(|(f, &w)| (*row_of.get(f).expect("boundary face inside domain"), w))
            .collect();
        bcols.push(col);
    }

    let vol_m = pow2(-domain.level * m as i32);
    let vol_s = pow2(-domain.level * (m as i32 + 1));
    let mut rhs = vec![0.0; nr];
    for (f, &w) in &t.terms {
        rhs[row_of[f]] = w;
    }

    let lp = SplitLp { nr, ns, cost_r: vol_m, cost_s: vol_s, bcols, rhs };
    let sol = lp.solve()?;

    let mut witness = CubicalChain::zero(domain.d, m + 1, domain.level);
    for (j, g) in col_faces.iter().enumerate() {
        let w = sol.s[j];
        if w != 0.0 {
            witness.add_term(g.clone(), w);
        }
    }
    witness.drop_small();
    let mut residual = CubicalChain::zero(domain.d, m, domain.level);
    for (i, f) in rows_faces.iter().enumerate() {
        let w = sol.r[i];
        if w != 0.0 {
            residual.add_term(f.clone(), w);
        }
    }
    residual.drop_small();

    Ok(FlatNormResult {
        value: sol.objective,
        witness_s: witness,
        residual,
        iterations: sol.iterations,
        optimality_gap: sol.gap,
    })
}

/// Brute-force check value for tiny instances: the objective
/// `Σ w_f |t_f - (Bs)_f| + Σ w_g |s_g|` is piecewise-linear and coercive in
/// `s`, so its minimum sits at an intersection of `ns` independent kink
/// hyperplanes from `{s_g = 0} ∪ {(Bs)_f = t_f}`. Enumerates them all.
pub fn flat_norm_oracle(t: &CubicalChain, domain: &ComplexDomain) -> Result<f64> {
    let t = crate::grid::refine(t, domain.level)?;
    let m = t.m;
    let rows_faces = domain.faces(m);
    let col_faces = if m + 1 <= domain.d { domain.faces(m + 1) } else { Vec::new() };
    let ns = col_faces.len();
    assert!(ns <= 6, "oracle is for instances with at most 6 candidate fillings");
    let nr = rows_faces.len();
    let mut row_of = std::collections::HashMap::new();
    for (i, f) in rows_faces.iter().enumerate() {
        row_of.insert(f.clone(), i);
    }
    let mut bmat = vec![vec![0.0; ns]; nr];
    for (j, g) in col_faces.iter().enumerate() {
        let single = CubicalChain::from_terms(domain.d, m + 1, domain.level, [(g.clone(), 1.0)]);
        for (f, &w) in &boundary(&single)?.terms {
            bmat[row_of[f]][j] = w;
        }
    }
    let mut rhs = vec![0.0; nr];
    for (f, &w) in &t.terms {
        rhs[row_of[f]] = w;
    }
    let vol_m = pow2(-domain.level * m as i32);
    let vol_s = pow2(-domain.level * (m as i32 + 1));

    let objective = |s: &[f64]| -> f64 {
        let mut v = 0.0;
        for i in 0..nr {
            let mut bs = 0.0;
            for j in 0..ns {
                bs += bmat[i][j] * s[j];
            }
            v += vol_m * (rhs[i] - bs).abs();
        }
        v + vol_s * s.iter().map(|x| x.abs()).sum::<f64>()
    };

    if ns == 0 {
        return Ok(objective(&[]));
    }

    // hyperplanes: a·s = b
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..ns {
        let mut a = vec![0.0; ns];
        a[j] = 1.0;
        planes.push((a, 0.0));
    }
    for i in 0..nr {
        if bmat[i].iter().any(|&x| x != 0.0) {
            planes.push((bmat[i].clone(), rhs[i]));
        }
    }

    let mut best = f64::INFINITY;
    let mut combo = vec![0usize; ns];
    enumerate_combos(planes.len(), ns, &mut combo, 0, 0, &mut |ix| {
        let mut a = vec![vec![0.0; ns + 1]; ns];
        for (r, &pi) in ix.iter().enumerate() {
            for c in 0..ns {
                a[r][c] = planes[pi].0[c];
            }
            a[r][ns] = planes[pi].1;
        }
        if let Some(s) = solve_square(&mut a) {
            let v = objective(&s);
            if v < best {
                best = v;
            }
        }
    });
    Ok(best)
}

fn enumerate_combos(
    n: usize,
    k: usize,
    combo: &mut Vec<usize>,
    pos: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if pos == k {
        f(combo);
        return;
    }
    for i in start..n {
        combo[pos] = i;
        enumerate_combos(n, k, combo, pos + 1, i + 1, f);
    }
}

fn solve_square(aug: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let n = aug.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if aug[r][col].abs() > aug[piv][col].abs() {
                piv = r;
            }
        }
        if aug[piv][col].abs() < 1e-12 {
            return None;
        }
        aug.swap(piv, col);
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = aug[r][col] / aug[col][col];
            for c in col..=n {
                aug[r][c] -= f * aug[col][c];
            }
        }
    }
    Some((0..n).map(|i| aug[i][n] / aug[i][i]).collect())
}

// ---------------------------------------------------------------------------
// Dense revised simplex on the split formulation
// ---------------------------------------------------------------------------

/// Variable layout: `[r+ (nr), r- (nr), s+ (ns), s- (ns)]` with the
/// constraint `(r+ - r-) + B (s+ - s-) = t`. Starting basis is the signed
/// residual slot per row, whose basis matrix is `diag(±1)`. Pricing is
/// most-negative reduced cost, falling back to Bland's rule after a run of
/// degenerate pivots.
struct SplitLp {
    nr: usize,
    ns: usize,
    cost_r: f64,
    cost_s: f64,
    bcols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

struct LpSolution {
    objective: f64,
    r: Vec<f64>,
    s: Vec<f64>,
    iterations: usize,
    gap: f64,
}

impl SplitLp {
    fn ncols(&self) -> usize {
        2 * self.nr + 2 * self.ns
    }

    fn cost(&self, j: usize) -> f64 {
        if j < 2 * self.nr {
            self.cost_r
        } else {
            self.cost_s
        }
    }

    fn column(&self, j: usize) -> ColRef<'_> {
        if j < self.nr {
            ColRef::Unit(j, 1.0)
        } else if j < 2 * self.nr {
            ColRef::Unit(j - self.nr, -1.0)
        } else if j < 2 * self.nr + self.ns {
            ColRef::Sparse(&self.bcols[j - 2 * self.nr], 1.0)
        } else {
            ColRef::Sparse(&self.bcols[j - 2 * self.nr - self.ns], -1.0)
        }
    }

    fn solve(&self) -> Result<LpSolution> {
        let nr = self.nr;
        let ncols = self.ncols();
        if nr == 0 {
            return Ok(LpSolution { objective: 0.0, r: vec![], s: vec![0.0; self.ns], iterations: 0, gap: 0.0 });
        }
        let mut basis: Vec<usize> = (0..nr)
            .map(|i| if self.rhs[i] >= 0.0 { i } else { i + nr })
            .collect();
        let mut in_basis = vec![false; ncols];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut binv = vec![0.0; nr * nr];
        for i in 0..nr {
            binv[i * nr + i] = if self.rhs[i] >= 0.0 { 1.0 } else { -1.0 };
        }
        let mut xb: Vec<f64> = self.rhs.iter().map(|&b| b.abs()).collect();

        let tol = LP_TOL * self.cost_r.max(self.cost_s).max(1.0);
        let mut iterations = 0usize;
        let max_iter = 60 * (nr + ncols) + 10_000;
        let mut degenerate_streak = 0usize;
        let gap;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::Numeric(format!(
                    "simplex failed to converge in {max_iter} iterations"
                )));
            }
            // y = c_B^T B^-1
            let mut y = vec![0.0; nr];
            for (row, &bj) in basis.iter().enumerate() {
                let cb = self.cost(bj);
                if cb != 0.0 {
                    let brow = &binv[row * nr..(row + 1) * nr];
                    for i in 0..nr {
                        y[i] += cb * brow[i];
                    }
                }
            }
            let bland = degenerate_streak > 2 * nr + 20;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if in_basis[j] {
                    continue;
                }
                let ya = match self.column(j) {
                    ColRef::Unit(row, v) => y[row] * v,
                    ColRef::Sparse(col, sgn) => {
                        let mut acc = 0.0;
                        for &(row, v) in col {
                            acc += y[row] * v;
                        }
                        acc * sgn
                    }
                };
                let rc = self.cost(j) - ya;
                if rc < -tol {
                    match (&enter, bland) {
                        (_, true) => {
                            enter = Some((j, rc));
                            break;
                        }
                        (None, false) => enter = Some((j, rc)),
                        (Some((_, best)), false) if rc < *best => enter = Some((j, rc)),
                        _ => {}
                    }
                }
            }
            let (jin, rc) = match enter {
                None => {
                    gap = 0.0;
                    break;
                }
                Some(e) => e,
            };
            let _ = rc;

            // direction w = B^-1 A_j
            let mut w = vec![0.0; nr];
            match self.column(jin) {
                ColRef::Unit(row, v) => {
                    for i in 0..nr {
                        w[i] = binv[i * nr + row] * v;
                    }
                }
                ColRef::Sparse(col, sgn) => {
                    for &(row, v) in col {
                        let f = v * sgn;
                        for i in 0..nr {
                            w[i] += binv[i * nr + row] * f;
                        }
                    }
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..nr {
                if w[i] > 1e-11 {
                    let ratio = xb[i] / w[i];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12
                                || ((ratio - lr).abs() <= 1e-12 && bland && basis[i] < basis[*li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (irow, step) = match leave {
                None => {
                    return Err(Error::Numeric(
                        "simplex direction unbounded; malformed flat-norm program".into(),
                    ))
                }
                Some(l) => l,
            };
            if step < 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            let piv = w[irow];
            for i in 0..nr {
                if i != irow {
                    xb[i] -= step * w[i];
                    if xb[i] < 0.0 {
                        xb[i] = 0.0;
                    }
                }
            }
            xb[irow] = step;
            in_basis[basis[irow]] = false;
            in_basis[jin] = true;
            basis[irow] = jin;
            let inv_piv = 1.0 / piv;
            for c in 0..nr {
                binv[irow * nr + c] *= inv_piv;
            }
            for r in 0..nr {
                if r != irow && w[r] != 0.0 {
                    let f = w[r];
                    for c in 0..nr {
                        binv[r * nr + c] -= f * binv[irow * nr + c];
                    }
                }
            }
        }

        let mut r = vec![0.0; nr];
        let mut s = vec![0.0; self.ns];
        let mut objective = 0.0;
        for (row, &j) in basis.iter().enumerate() {
            let v = xb[row];
            if v == 0.0 {
                continue;
            }
            objective += self.cost(j) * v;
            if j < nr {
                r[j] += v;
            } else if j < 2 * nr {
                r[j - nr] -= v;
            } else if j < 2 * nr + self.ns {
                s[j - 2 * nr] += v;
            } else {
                s[j - 2 * nr - self.ns] -= v;
            }
        }
        Ok(LpSolution { objective, r, s, iterations, gap })
    }
}

enum ColRef<'a> {
    Unit(usize, f64),
    Sparse(&'a [(usize, f64)], f64),
}

// ---------------------------------------------------------------------------
// Fractional decomposition costs
// ---------------------------------------------------------------------------

/// `Σ_k N(T_k)^(1-α) F(T_k)^α` from the decomposition's cached values. An
/// upper bound for the α-fractional norm of the summed chain.
pub fn frac_cost(dec: &Decomposition) -> Result<f64> {
    if !(0.0..=1.0).contains(&dec.alpha) {
        return Err(precondition(format!("alpha {} outside [0,1]", dec.alpha)));
    }
    Ok(dec.recompute_cost())
}

/// `Σ_k M(∂T_k)^(1-α) M(T_k)^α`. Scale-covariant variant meant for
/// top-dimensional chains; other degrees are accepted, see
/// [`tilde_degree_warning`].
pub fn frac_cost_tilde(dec: &Decomposition) -> Result<f64> {
    if !(0.0..=1.0).contains(&dec.alpha) {
        return Err(precondition(format!("alpha {} outside [0,1]", dec.alpha)));
    }
    Ok(dec
        .stats
        .iter()
        .map(|s| {
            if s.mass == 0.0 {
                0.0
            } else {
                s.boundary_mass.powf(1.0 - dec.alpha) * s.mass.powf(dec.alpha)
            }
        })
        .sum())
}

/// Greedy improvement of a decomposition's cost upper bound: repeatedly try
/// merging part pairs (profitable when their sum cancels) and splitting
/// parts across the longest axis of their bounding box (profitable when a
/// part holds well-separated clusters, since `N^(1-α) F^α` is superadditive
/// in additively splitting masses). Accepts strict improvements only; the
/// cached flat values stay mass bounds.
pub fn improve_decomposition(dec: &Decomposition, rounds: usize) -> Result<Decomposition> {
    let mut parts: Vec<Chain> = dec.parts.clone();
    let alpha = dec.alpha;
    let cost_of = |chains: &[Chain]| -> Result<f64> {
        Ok(Decomposition::with_mass_bounds(chains.to_vec(), alpha)?.cost)
    };
    let mut best = cost_of(&parts)?;
    for _ in 0..rounds {
        let mut improved = false;
        // merges
        'merge: for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                let (Chain::Cubical(a), Chain::Cubical(b)) = (&parts[i], &parts[j]) else {
                    continue;
                };
                if a.level != b.level || a.m != b.m {
                    continue;
                }
                let merged = Chain::Cubical(a.add(b));
                let mut cand: Vec<Chain> = Vec::with_capacity(parts.len() - 1);
                for (k, p) in parts.iter().enumerate() {
                    if k != i && k != j {
                        cand.push(p.clone());
                    }
                }
                cand.push(merged);
                let c = cost_of(&cand)?;
                if c < best - 1e-12 {
                    parts = cand;
                    best = c;
                    improved = true;
                    break 'merge;
                }
            }
        }
        // splits across the longest bounding-box axis
        'split: for i in 0..parts.len() {
            let Chain::Cubical(a) = &parts[i] else { continue };
            let Some((lo, hi)) = a.bbox() else { continue };
            let axis = (0..a.d).max_by_key(|&k| hi[k] - lo[k]).unwrap_or(0);
            if hi[axis] - lo[axis] < 2 {
                continue;
            }
            let mid = lo[axis] + (hi[axis] - lo[axis]) / 2;
            let mut left = CubicalChain::zero(a.d, a.m, a.level);
            let mut right = CubicalChain::zero(a.d, a.m, a.level);
            for (f, &w) in &a.terms {
                if f.base[axis] < mid {
                    left.add_term(f.clone(), w);
                } else {
                    right.add_term(f.clone(), w);
                }
            }
            if left.terms.is_empty() || right.terms.is_empty() {
                continue;
            }
            let mut cand: Vec<Chain> = Vec::with_capacity(parts.len() + 1);
            for (k, p) in parts.iter().enumerate() {
                if k != i {
                    cand.push(p.clone());
                }
            }
            cand.push(Chain::Cubical(left));
            cand.push(Chain::Cubical(right));
            let c = cost_of(&cand)?;
            if c < best - 1e-12 {
                parts = cand;
                best = c;
                improved = true;
                break 'split;
            }
        }
        if !improved {
            break;
        }
    }
    parts.retain(|p| match p {
        Chain::Cubical(c) => !c.terms.is_empty(),
        Chain::Simplicial(s) => !s.simplices.is_empty(),
    });
    Decomposition::with_mass_bounds(parts, alpha)
}

/// `Some(message)` when the tilde cost is used off its natural
/// top-dimensional degree.
pub fn tilde_degree_warning(dec: &Decomposition) -> Option<String> {
    let off: Vec<usize> = dec
        .parts
        .iter()
        .filter(|p| p.degree() != p.ambient())
        .map(|p| p.degree())
        .collect();
    if off.is_empty() {
        None
    } else {
        Some(format!(
            "tilde cost applied to non-top-dimensional parts (degrees {:?})",
            off
        ))
    }
}

/// Explicit constant `C(α,β)` bounding `|Σ_n ω_n(T)|` for functionals obeying
/// the two-scale estimates `|ω_n(T)| ≤ 2^{n(β-α)} κ N(T)^{1-β} F(T)^β` and
/// `|ω_n(T)| ≤ 2^{-nα} κ N(T)`: splitting the sum at the index `N` with
/// `2^{-(N+1)} ≤ F(T)/N(T) ≤ 2^{-N}` leaves two geometric series, giving
/// `C = 2^{β-α}/(2^{β-α} - 1) + 1/(1 - 2^{-α})` and the bound
/// `|Σ_n ω_n(T)| ≤ C κ N(T)^{1-α} F(T)^α`.
pub fn lp_constant(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < beta && beta <= 1.0) {
        return Err(precondition(format!(
            "need 0 < alpha < beta <= 1, got alpha={alpha}, beta={beta}"
        )));
    }
    let head = 2f64.powf(beta - alpha) / (2f64.powf(beta - alpha) - 1.0);
    let tail = 1.0 / (1.0 - 2f64.powf(-alpha));
    Ok(head + tail)
}

// ---------------------------------------------------------------------------
// Deformation onto a coarser grid
// ---------------------------------------------------------------------------

/// Residual pieces of a deformation `T = P + ∂R + S`: `R` is the swept
/// `(m+1)`-chain and `S` the exact remainder (boundary sweeps plus
/// within-face fluctuation).
#[derive(Clone, Debug)]
pub enum DeformPieces {
    Cubical { r: CubicalChain, s: CubicalChain },
    Simplicial { r: SimplicialChain, s: SimplicialChain },
}

#[derive(Clone, Debug)]
pub struct DeformResult {
    /// Polyhedral chain on the `2^-k` grid.
    pub p: CubicalChain,
    pub pieces: DeformPieces,
    pub ratios: DeformRatios,
    /// For polyline inputs: the subdivision of `T` actually deformed (equal
    /// to `T` as a current). The exact identity `T' = P + ∂R + S` holds
    /// against it; for cubical inputs it holds against `T` itself.
    pub refined_input: Option<SimplicialChain>,
}

/// Measured mass ratios certifying the deformation estimates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformRatios {
    /// `M(R) / (ε M(T))`; 0 when `M(T) = 0`.
    pub sweep_over_eps_mass: f64,
    /// `M(S) / (ε M(∂T))`; NaN when `M(∂T) = 0` and `M(S) > 0`.
    pub residual_over_eps_boundary: f64,
    /// `M(P) / M(T)`.
    pub grid_over_mass: f64,
    pub mass_t: f64,
    pub mass_p: f64,
    pub mass_r: f64,
    pub mass_s: f64,
}

fn ratios(eps: f64, mt: f64, mbt: f64, mp: f64, mr: f64, ms: f64) -> DeformRatios {
    DeformRatios {
        sweep_over_eps_mass: if mt > 0.0 { mr / (eps * mt) } else { 0.0 },
        residual_over_eps_boundary: if mbt > 0.0 {
            ms / (eps * mbt)
        } else if ms == 0.0 {
            0.0
        } else {
            f64::NAN
        },
        grid_over_mass: if mt > 0.0 { mp / mt } else { 0.0 },
        mass_t: mt,
        mass_p: mp,
        mass_r: mr,
        mass_s: ms,
    }
}

/// Deform a chain onto the standard `ε`-grid, `ε = 2^-k`. Returns the grid
/// chain together with swept and remainder pieces so that `T = P + ∂R + S`
/// holds exactly as chains.
///
/// Cubical chains of any degree are supported; simplicial chains of degree
/// 0 and 1.
pub fn deform(t: &Chain, k: i32) -> Result<DeformResult> {
    match t {
        Chain::Cubical(c) => deform_cubical(c, k),
        Chain::Simplicial(s) => match s.m {
            0 => deform_points(s, k),
            1 => deform_polyline(s, k),
            m => Err(precondition(format!(
                "simplicial deformation supports degrees 0 and 1, got {m}"
            ))),
        },
    }
}

/// Parse a dyadic `ε` into the grid level `k` with `ε = 2^-k`.
pub fn eps_to_level(eps: f64) -> Result<i32> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(precondition("epsilon must be a positive dyadic power"));
    }
    let k = -eps.log2();
    let ki = k.round();
    if (k - ki).abs() > 1e-9 {
        return Err(precondition(format!("epsilon {eps} is not a power of two")));
    }
    Ok(ki as i32)
}

fn deform_cubical(t: &CubicalChain, k: i32) -> Result<DeformResult> {
    if k > t.level {
        return Err(precondition(format!(
            "grid level {} finer than chain level {}; refine the chain first",
            k, t.level
        )));
    }
    let eps = pow2(-k);
    let mt = mass(t);
    let mbt = if t.m >= 1 { mass(&boundary(t)?) } else { 0.0 };
    if t.level == k {
        let zero_r = CubicalChain::zero(t.d, t.m + 1, k);
        let zero_s = CubicalChain::zero(t.d, t.m, k);
        return Ok(DeformResult {
            p: t.clone(),
            pieces: DeformPieces::Cubical { r: zero_r, s: zero_s },
            ratios: ratios(eps, mt, mbt, mt, 0.0, 0.0),
            refined_input: None,
        });
    }
    let ell = t.level;
    let rfac = 1i64 << (ell - k) as u32; // fine cells per coarse cell
    let mut cur = t.clone();
    let mut sweep = CubicalChain::zero(t.d, t.m + 1, ell);

    for axis in 0..t.d as u8 {
        let mut next = CubicalChain::zero(t.d, t.m, ell);
        for (face, &w) in &cur.terms {
            if face.axes.contains(&axis) {
                next.add_term(face.clone(), w);
                continue;
            }
            let b = face.base[axis as usize];
            let q = b.div_euclid(rfac);
            let rem = b - q * rfac;
            let target = if 2 * rem < rfac { q * rfac } else { (q + 1) * rfac };
            if target == b {
                next.add_term(face.clone(), w);
                continue;
            }
            let mut new_axes: Vec<u8> = face.axes.clone();
            let pos = new_axes.iter().position(|&a| a > axis).unwrap_or(new_axes.len());
            new_axes.insert(pos, axis);
            let step_sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            let (lo, hi, dir) = if target > b { (b, target, 1.0) } else { (target, b, -1.0) };
            for p in lo..hi {
                let mut base = face.base.clone();
                base[axis as usize] = p;
                sweep.add_term(DyadicFace::new(base, new_axes.clone()), dir * step_sign * w);
            }
            let mut moved = face.base.clone();
            moved[axis as usize] = target;
            next.add_term(DyadicFace::new(moved, face.axes.clone()), w);
        }
        next.drop_small();
        cur = next;
    }

    // average within each coarse face
    let scale = pow2(-(ell - k) * t.m as i32); // fine/coarse volume ratio
    let mut p = CubicalChain::zero(t.d, t.m, k);
    for (face, &w) in &cur.terms {
        let mut base = vec![0i64; t.d];
        for i in 0..t.d {
            base[i] = face.base[i].div_euclid(rfac);
        }
        p.add_term(DyadicFace::new(base, face.axes.clone()), w * scale);
    }
    p.drop_small();

    let p_fine = crate::grid::refine(&p, ell)?;
    let s = t.sub(&p_fine).sub(&boundary(&sweep)?);

    let (mp, mr, ms) = (mass(&p), mass(&sweep), mass(&s));
    Ok(DeformResult {
        p,
        pieces: DeformPieces::Cubical { r: sweep, s },
        ratios: ratios(eps, mt, mbt, mp, mr, ms),
        refined_input: None,
    })
}

fn snap(x: f64, eps: f64) -> i64 {
    (x / eps + 0.5).floor() as i64
}

fn deform_points(t: &SimplicialChain, k: i32) -> Result<DeformResult> {
    let eps = pow2(-k);
    let mt = simplicial_mass(t);
    let mut p = CubicalChain::zero(t.d, 0, k);
    let mut r = SimplicialChain::zero(t.d, 1);
    for s in &t.simplices {
        let v = &s.verts[0];
        let g: Vec<i64> = v.iter().map(|&x| snap(x, eps)).collect();
        let gv: Vec<f64> = g.iter().map(|&i| i as f64 * eps).collect();
        if gv != *v {
            r.push(vec![v.clone(), gv.clone()], -s.coeff);
        }
        p.add_term(DyadicFace::new(g, vec![]), s.coeff);
    }
    p.drop_small();
    let p_simp = grid_faces_as_points(&p, eps);
    let s = t.sub(&p_simp).sub(&simplicial_boundary(&r)?).canonicalize();
    let (mp, mr, ms) = (mass(&p), simplicial_mass(&r), simplicial_mass(&s));
    Ok(DeformResult {
        p,
        pieces: DeformPieces::Simplicial { r, s },
        ratios: ratios(eps, mt, 0.0, mp, mr, ms),
        refined_input: Some(t.clone()),
    })
}

fn grid_faces_as_points(p: &CubicalChain, eps: f64) -> SimplicialChain {
    let mut out = SimplicialChain::zero(p.d, 0);
    for (f, &w) in &p.terms {
        out.push(vec![f.base.iter().map(|&i| i as f64 * eps).collect()], w);
    }
    out
}

fn deform_polyline(t: &SimplicialChain, k: i32) -> Result<DeformResult> {
    let eps = pow2(-k);
    let mt = simplicial_mass(t);
    let bt = simplicial_boundary(t)?.canonicalize();
    let mbt = simplicial_mass(&bt);

    // subdivide segments to length <= eps/4; equal to T as a current
    let mut fine = SimplicialChain::zero(t.d, 1);
    for s in &t.simplices {
        let (a, b, w) = (&s.verts[0], &s.verts[1], s.coeff);
        let len: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let pieces = ((4.0 * len / eps).ceil() as usize).max(1);
        let mut prev = a.clone();
        for i in 1..=pieces {
            let tt = i as f64 / pieces as f64;
            let q: Vec<f64> = if i == pieces {
                b.clone()
            } else {
                a.iter().zip(b).map(|(x, y)| x + tt * (y - x)).collect()
            };
            fine.push(vec![prev.clone(), q.clone()], w);
            prev = q;
        }
    }

    let mut p = CubicalChain::zero(t.d, 1, k);
    let mut sweep = SimplicialChain::zero(t.d, 2);

    for s in &fine.simplices {
        let (a, b, w) = (&s.verts[0], &s.verts[1], s.coeff);
        let ag: Vec<i64> = a.iter().map(|&x| snap(x, eps)).collect();
        let bg: Vec<i64> = b.iter().map(|&x| snap(x, eps)).collect();
        let ag_pt: Vec<f64> = ag.iter().map(|&j| j as f64 * eps).collect();
        let bg_pt: Vec<f64> = bg.iter().map(|&j| j as f64 * eps).collect();
        // prism from [a, b] down to [snap(a), snap(b)], oriented so that the
        // boundary of the total sweep reproduces T - P up to endpoint snaps
        sweep.push(vec![a.clone(), ag_pt.clone(), bg_pt.clone()], -w);
        sweep.push(vec![a.clone(), b.clone(), bg_pt.clone()], w);
        // monotone staircase from ag to bg with a fan filling
        let mut walk = ag.clone();
        let mut walk_pt = ag_pt.clone();
        for axis in 0..t.d {
            while walk[axis] != bg[axis] {
                let dir = if bg[axis] > walk[axis] { 1i64 } else { -1 };
                let edge_base = if dir > 0 {
                    walk.clone()
                } else {
                    let mut e = walk.clone();
                    e[axis] -= 1;
                    e
                };
                p.add_term(DyadicFace::new(edge_base, vec![axis as u8]), dir as f64 * w);
                walk[axis] += dir;
                let mut next_pt = walk_pt.clone();
                next_pt[axis] = walk[axis] as f64 * eps;
                sweep.push(vec![ag_pt.clone(), walk_pt.clone(), next_pt.clone()], -w);
                walk_pt = next_pt;
            }
        }
    }
    p.drop_small();

    let p_simp = grid_edges_as_simplicial(&p, eps);
    let s = fine
        .sub(&p_simp)
        .sub(&simplicial_boundary(&sweep)?)
        .canonicalize();
    let (mp, mr, ms) = (mass(&p), simplicial_mass(&sweep), simplicial_mass(&s));
    Ok(DeformResult {
        p,
        pieces: DeformPieces::Simplicial { r: sweep, s },
        ratios: ratios(eps, mt, mbt, mp, mr, ms),
        refined_input: Some(fine),
    })
}

pub(crate) fn grid_edges_as_simplicial(p: &CubicalChain, eps: f64) -> SimplicialChain {
    let mut out = SimplicialChain::zero(p.d, 1);
    for (f, &w) in &p.terms {
        let a: Vec<f64> = f.base.iter().map(|&i| i as f64 * eps).collect();
        let mut b = a.clone();
        b[f.axes[0] as usize] += eps;
        out.push(vec![a, b], w);
    }
    out
}

/// Upper bound `F(T) ≤ F(P) + M(R) + M(S)` for a simplicial chain through its
/// deformation at level `k`, the grid part measured by LP.
pub fn flat_norm_simplicial_upper(
    t: &SimplicialChain,
    k: i32,
    pad: i64,
) -> Result<(f64, FlatNormResult)> {
    let def = deform(&Chain::Simplicial(t.clone()), k)?;
    let (mr, ms) = match &def.pieces {
        DeformPieces::Simplicial { r, s } => (simplicial_mass(r), simplicial_mass(s)),
        DeformPieces::Cubical { r, s } => (mass(r), mass(s)),
    };
    if def.p.is_zero() {
        let zero = CubicalChain::zero(t.d, t.m, k);
        return Ok((
            mr + ms,
            FlatNormResult {
                value: 0.0,
                witness_s: CubicalChain::zero(t.d, t.m + 1, k),
                residual: zero,
                iterations: 0,
                optimality_gap: 0.0,
            },
        ));
    }
    let domain = ComplexDomain::padded_cover(&def.p, pad)?;
    let lp = flat_norm(&def.p, &domain)?;
    Ok((lp.value + mr + ms, lp))
}
