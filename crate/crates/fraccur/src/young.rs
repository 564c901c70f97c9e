//! Evaluation of sampled differential forms on chains, the Stokes/divergence
//! check, one-dimensional Young integration, the d-dimensional
//! corner-increment integral, and the multiscale wedge product with
//! geometric tail control.

use std::sync::Arc;

use crate::flatnorm::axis_subsets;
use crate::grid::{pow2, Chain, CubicalChain, SimplicialChain};
use crate::holder::{mollify, HolderFunction};
use crate::pushforward::refine_to_mesh;
use crate::util::{det_sum, linear_fit};
use crate::{precondition, Result};

// ---------------------------------------------------------------------------
// Scalar fields and sampled forms
// ---------------------------------------------------------------------------

/// A scalar component of a differential form: an evaluator with an optional
/// gradient.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
}

impl ScalarField {
    pub fn constant(c: f64, d: usize) -> Self {
        ScalarField {
            eval: Arc::new(move |_| c),
            grad: Some(Arc::new(move |_| vec![0.0; d])),
        }
    }

    pub fn from_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { eval: Arc::new(f), grad: None }
    }

    pub fn from_fn_with_grad(
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarField { eval: Arc::new(f), grad: Some(Arc::new(g)) }
    }

    pub fn from_holder(h: &HolderFunction) -> Self {
        assert_eq!(h.codomain, 1);
        let h = h.clone();
        ScalarField { eval: Arc::new(move |x| h.eval(x)[0]), grad: None }
    }

    pub fn from_smoothed(s: &crate::holder::SmoothedFn) -> Self {
        assert_eq!(s.codomain, 1);
        let s2 = s.clone();
        let s3 = s.clone();
        ScalarField {
            eval: Arc::new(move |x| s2.value(x)[0]),
            grad: Some(Arc::new(move |x| s3.grad(x)[0].clone())),
        }
    }

    /// Piecewise-constant grid values with central differences at grid scale.
    pub fn from_grid(g: &crate::sobolev::GridFunction) -> Self {
        let g2 = g.clone();
        let g3 = g.clone();
        let h = pow2(-g.level);
        ScalarField {
            eval: Arc::new(move |x| g2.eval(x)),
            grad: Some(Arc::new(move |x| {
                (0..x.len())
                    .map(|i| {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[i] += h;
                        xm[i] -= h;
                        (g3.eval(&xp) - g3.eval(&xm)) / (2.0 * h)
                    })
                    .collect()
            })),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.grad {
            Some(g) => Ok(g(x)),
            None => Err(precondition("component has no gradient")),
        }
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    fn scale_add(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        let (e1, e2) = (self.eval.clone(), other.eval.clone());
        let grad = match (&self.grad, &other.grad) {
            (Some(g1), Some(g2)) => {
                let (g1, g2) = (g1.clone(), g2.clone());
                Some(Arc::new(move |x: &[f64]| {
                    g1(x)
                        .iter()
                        .zip(g2(x))
                        .map(|(p, q)| a * p + b * q)
                        .collect::<Vec<f64>>()
                }) as Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>)
            }
            _ => None,
        };
        ScalarField { eval: Arc::new(move |x| a * e1(x) + b * e2(x)), grad }
    }

    fn product(&self, other: &ScalarField) -> ScalarField {
        let (e1, e2) = (self.eval.clone(), other.eval.clone());
        ScalarField { eval: Arc::new(move |x| e1(x) * e2(x)), grad: None }
    }
}

/// A degree-`m` form with one scalar component per increasing multi-index
/// (lexicographic order), and a declared Hölder exponent.
#[derive(Clone)]
pub struct SampledForm {
    pub d: usize,
    pub m: usize,
    pub alpha: f64,
    pub comps: Vec<ScalarField>,
}

/// Increasing multi-indices of length `m` in `{0..d-1}`, lexicographic.
pub fn multi_indices(d: usize, m: usize) -> Vec<Vec<u8>> {
    axis_subsets(d, m)
}

impl SampledForm {
    pub fn new(d: usize, m: usize, alpha: f64, comps: Vec<ScalarField>) -> Result<Self> {
        let want = multi_indices(d, m).len();
        if comps.len() != want {
            return Err(precondition(format!(
                "degree-{m} form in {d} dimensions needs {want} components, got {}",
                comps.len()
            )));
        }
        Ok(SampledForm { d, m, alpha, comps })
    }

    /// The constant form `dx_I` scaled by `c`.
    pub fn monomial(d: usize, axes: &[u8], c: f64) -> Self {
        let idxs = multi_indices(d, axes.len());
        let comps = idxs
            .iter()
            .map(|ix| {
                if ix.as_slice() == axes {
                    ScalarField::constant(c, d)
                } else {
                    ScalarField::constant(0.0, d)
                }
            })
            .collect();
        SampledForm { d, m: axes.len(), alpha: 1.0, comps }
    }

    fn comp_of(&self, axes: &[u8]) -> &ScalarField {
        let idxs = multi_indices(self.d, self.m);
        let pos = idxs.iter().position(|ix| ix.as_slice() == axes).expect("valid axes");
        &self.comps[pos]
    }

    pub fn sub(&self, other: &SampledForm) -> SampledForm {
        assert_eq!((self.d, self.m), (other.d, other.m));
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.scale_add(1.0, b, -1.0))
            .collect();
        SampledForm { d: self.d, m: self.m, alpha: self.alpha, comps }
    }

    /// Pointwise wedge with shuffle signs.
    pub fn wedge(&self, other: &SampledForm) -> SampledForm {
        assert_eq!(self.d, other.d);
        let m = self.m + other.m;
        assert!(m <= self.d, "wedge degree exceeds ambient dimension");
        let outs = multi_indices(self.d, m);
        let mut comps = Vec::with_capacity(outs.len());
        for k in &outs {
            // split K into I (from self) and J (from other) over all ways
            let mut terms: Vec<(f64, ScalarField)> = Vec::new();
            for pick in axis_subsets(k.len(), self.m) {
                let i_set: Vec<u8> = pick.iter().map(|&p| k[p as usize]).collect();
                let j_set: Vec<u8> = (0..k.len() as u8)
                    .filter(|p| !pick.contains(p))
                    .map(|p| k[p as usize])
                    .collect();
                let sign = shuffle_sign(&i_set, &j_set);
                terms.push((sign, self.comp_of(&i_set).product(other.comp_of(&j_set))));
            }
            let field = match terms.len() {
                0 => ScalarField::constant(0.0, self.d),
                _ => {
                    let mut acc = terms[0].1.scale_add(terms[0].0, &ScalarField::constant(0.0, self.d), 0.0);
                    for (s, f) in &terms[1..] {
                        acc = acc.scale_add(1.0, f, *s);
                    }
                    acc
                }
            };
            comps.push(field);
        }
        SampledForm { d: self.d, m, alpha: self.alpha + other.alpha - 1.0, comps }
    }

    /// Exterior derivative from component gradients.
    pub fn exterior_derivative(&self) -> Result<SampledForm> {
        if self.m + 1 > self.d {
            return Ok(SampledForm {
                d: self.d,
                m: self.m + 1,
                alpha: self.alpha,
                comps: vec![],
            });
        }
        let outs = multi_indices(self.d, self.m + 1);
        let mut comps = Vec::with_capacity(outs.len());
        for k in &outs {
            let mut terms: Vec<(f64, usize, ScalarField)> = Vec::new();
            for (pos, &j) in k.iter().enumerate() {
                let rest: Vec<u8> = k.iter().copied().filter(|&a| a != j).collect();
                let comp = self.comp_of(&rest).clone();
                if !comp.has_grad() {
                    return Err(precondition("exterior derivative needs component gradients"));
                }
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                terms.push((sign, j as usize, comp));
            }
            comps.push(ScalarField {
                eval: {
                    let terms = terms.clone();
                    Arc::new(move |x: &[f64]| {
                        terms
                            .iter()
                            .map(|(s, j, c)| s * c.gradient(x).expect("checked")[*j])
                            .sum()
                    })
                },
                grad: None,
            });
        }
        Ok(SampledForm { d: self.d, m: self.m + 1, alpha: self.alpha, comps })
    }
}

impl std::fmt::Debug for SampledForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SampledForm(d={}, m={}, alpha={})", self.d, self.m, self.alpha)
    }
}

fn shuffle_sign(i_set: &[u8], j_set: &[u8]) -> f64 {
    // sign of the permutation sorting the concatenation
    let mut inv = 0usize;
    for &a in i_set {
        for &b in j_set {
            if a > b {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

// ---------------------------------------------------------------------------
// Evaluation of forms on chains
// ---------------------------------------------------------------------------

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

/// Pair a form with a chain: sum over faces of coefficient times volume
/// times the matching component, averaged by a two-point-per-axis Gauss rule
/// (edge midpoints on triangles). Exact for constant forms on cubical
/// chains.
pub fn form_eval(omega: &SampledForm, t: &Chain) -> Result<f64> {
    if omega.m != t.degree() {
        return Err(precondition(format!(
            "degree mismatch: form {} vs chain {}",
            omega.m,
            t.degree()
        )));
    }
    match t {
        Chain::Cubical(c) => form_eval_cubical(omega, c),
        Chain::Simplicial(s) => form_eval_simplicial(omega, s),
    }
}

fn form_eval_cubical(omega: &SampledForm, c: &CubicalChain) -> Result<f64> {
    let h = pow2(-c.level);
    let vol = pow2(-c.level * c.m as i32);
    let idxs = multi_indices(c.d, c.m);
    let terms: Vec<(&crate::grid::DyadicFace, f64, usize)> = c
        .terms
        .iter()
        .map(|(f, &w)| {
            let pos = idxs.iter().position(|ix| *ix == f.axes).expect("valid face axes");
            (f, w, pos)
        })
        .collect();
    Ok(det_sum(terms.len(), |i| {
        let (face, w, pos) = terms[i];
        let comp = &omega.comps[pos];
        let mcount = face.axes.len();
        let base: Vec<f64> = face.base.iter().map(|&b| b as f64 * h).collect();
        let mut avg = 0.0;
        for mask in 0..(1u32 << mcount) {
            let mut x = base.clone();
            for (j, &a) in face.axes.iter().enumerate() {
                let off = if mask >> j & 1 == 1 { 0.5 + 0.5 * INV_SQRT3 } else { 0.5 - 0.5 * INV_SQRT3 };
                x[a as usize] += off * h;
            }
            avg += comp.value(&x);
        }
        avg /= (1u32 << mcount) as f64;
        w * vol * avg
    }))
}

fn form_eval_simplicial(omega: &SampledForm, s: &SimplicialChain) -> Result<f64> {
    let idxs = multi_indices(s.d, s.m);
    Ok(det_sum(s.simplices.len(), |si| {
        let sx = &s.simplices[si];
        // oriented m-vector components: det of selected rows of the edge
        // matrix divided by m!
        let m = s.m;
        let edges: Vec<Vec<f64>> = (1..=m)
            .map(|i| {
                sx.verts[i]
                    .iter()
                    .zip(&sx.verts[0])
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let mut fact = 1.0;
        for i in 2..=m {
            fact *= i as f64;
        }
        // quadrature nodes
        let nodes: Vec<Vec<f64>> = match m {
            0 => vec![sx.verts[0].clone()],
            1 => {
                let (a, b) = (&sx.verts[0], &sx.verts[1]);
                vec![
                    a.iter().zip(b).map(|(x, y)| x + (0.5 - 0.5 * INV_SQRT3) * (y - x)).collect(),
                    a.iter().zip(b).map(|(x, y)| x + (0.5 + 0.5 * INV_SQRT3) * (y - x)).collect(),
                ]
            }
            2 => {
                let (a, b, c) = (&sx.verts[0], &sx.verts[1], &sx.verts[2]);
                let mid = |p: &Vec<f64>, q: &Vec<f64>| -> Vec<f64> {
                    p.iter().zip(q).map(|(x, y)| 0.5 * (x + y)).collect()
                };
                vec![mid(a, b), mid(b, c), mid(c, a)]
            }
            _ => vec![centroid(&sx.verts)],
        };
        let mut total = 0.0;
        for (pos, axes) in idxs.iter().enumerate() {
            let xi = if m == 0 {
                1.0
            } else {
                let mut sub = vec![vec![0.0; m]; m];
                for (r, e) in edges.iter().enumerate() {
                    for (cc, &a) in axes.iter().enumerate() {
                        sub[r][cc] = e[a as usize];
                    }
                }
                det_small(&mut sub) / fact
            };
            if xi == 0.0 {
                continue;
            }
            let mut avg = 0.0;
            for nd in &nodes {
                avg += omega.comps[pos].value(nd);
            }
            avg /= nodes.len() as f64;
            total += xi * avg;
        }
        sx.coeff * total
    }))
}

fn centroid(verts: &[Vec<f64>]) -> Vec<f64> {
    let d = verts[0].len();
    let mut c = vec![0.0; d];
    for v in verts {
        for i in 0..d {
            c[i] += v[i];
        }
    }
    for x in &mut c {
        *x /= verts.len() as f64;
    }
    c
}

fn det_small(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            let mut det = 1.0;
            for col in 0..n {
                let mut piv = col;
                for r in col + 1..n {
                    if a[r][col].abs() > a[piv][col].abs() {
                        piv = r;
                    }
                }
                if a[piv][col] == 0.0 {
                    return 0.0;
                }
                if piv != col {
                    a.swap(piv, col);
                    det = -det;
                }
                det *= a[col][col];
                for r in col + 1..n {
                    let f = a[r][col] / a[col][col];
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
            det
        }
    }
}

/// Both sides of the Stokes pairing: `(⟨dω, T⟩, ⟨ω, ∂T⟩, gap)`.
pub fn stokes_check(omega: &SampledForm, t: &Chain) -> Result<(f64, f64, f64)> {
    let dw = omega.exterior_derivative()?;
    let lhs = form_eval(&dw, t)?;
    let rhs = form_eval(omega, &t.boundary()?)?;
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

// ---------------------------------------------------------------------------
// Young integration in one dimension
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct Young1dResult {
    pub value: f64,
    pub sums: Vec<f64>,
    pub increments: Vec<f64>,
    /// fitted per-level decay exponent of the increments (log2 slope)
    pub rate_log2: Option<f64>,
    /// theoretical exponent `-(α₀ + α₁ - 1)`
    pub predicted_rate_log2: f64,
    pub cauchy_pass: bool,
}

/// Dyadic left-point Riemann–Stieltjes sums `Σ g0(t_i)(g1(t_{i+1}) - g1(t_i))`
/// at levels `1..=level`. Diagnostics are produced regardless of whether the
/// exponent sum clears the convergence threshold.
pub fn young_1d(g0: &HolderFunction, g1: &HolderFunction, level: u32) -> Result<Young1dResult> {
    if level < 2 {
        return Err(precondition("need at least two levels"));
    }
    let mut sums = Vec::with_capacity(level as usize);
    for l in 1..=level {
        let n = 1usize << l;
        let h = 1.0 / n as f64;
        let s = det_sum(n, |i| {
            let t = i as f64 * h;
            g0.eval1(t) * (g1.eval1(t + h) - g1.eval1(t))
        });
        sums.push(s);
    }
    let increments: Vec<f64> = sums.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let rate = fit_rate(&increments);
    let predicted = -(g0.gamma + g1.gamma - 1.0);
    let cauchy_pass = matches!(rate, Some(r) if r <= -0.05);
    Ok(Young1dResult {
        value: *sums.last().unwrap(),
        sums,
        increments,
        rate_log2: rate,
        predicted_rate_log2: predicted,
        cauchy_pass,
    })
}

fn fit_rate(increments: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = increments
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 1e-300)
        .map(|(i, &d)| (i as f64, d.log2()))
        .collect();
    if pts.len() < 4 {
        return if increments.iter().all(|&d| d <= 1e-300) && increments.len() >= 2 {
            Some(f64::NEG_INFINITY)
        } else {
            None
        };
    }
    // fit over the second half where the asymptotic regime dominates
    let start = pts.len() / 2;
    let xs: Vec<f64> = pts[start..].iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts[start..].iter().map(|p| p.1).collect();
    if xs.len() < 3 {
        return None;
    }
    Some(linear_fit(&xs, &ys).0)
}

// ---------------------------------------------------------------------------
// Corner-increment integral in d dimensions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct ZustResult {
    pub value: f64,
    pub sums: Vec<f64>,
    pub increments: Vec<f64>,
    pub rate_log2: Option<f64>,
    /// theoretical exponent `-(Σ α_k - d)`
    pub predicted_rate_log2: f64,
    pub cauchy_pass: bool,
}

/// `Σ_Q g⁰(x_Q) det M(Q)` over dyadic `L`-cubes of the unit cube, where
/// `M(Q)_{ij} = g^i(x_Q + 2^{-L} e_j) - g^i(x_Q)` anchors edge increments at
/// the lower corner. The determinant makes the discretization alternating in
/// `g¹..g^d` and reduces to the classical left sum for `d = 1`.
pub fn zust_integral(g: &[HolderFunction], level: u32) -> Result<ZustResult> {
    if g.is_empty() {
        return Err(precondition("need d+1 functions"));
    }
    let d = g[0].d();
    if g.len() != d + 1 {
        return Err(precondition(format!(
            "need d+1 = {} functions for dimension {d}, got {}",
            d + 1,
            g.len()
        )));
    }
    let mut sums = Vec::new();
    for l in 1..=level {
        sums.push(zust_level(g, d, l));
    }
    let increments: Vec<f64> = sums.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let rate = fit_rate(&increments);
    let alpha_sum: f64 = g.iter().map(|f| f.gamma).sum();
    Ok(ZustResult {
        value: *sums.last().unwrap(),
        sums,
        increments,
        rate_log2: rate,
        predicted_rate_log2: -(alpha_sum - d as f64),
        cauchy_pass: matches!(rate, Some(r) if r <= -0.05),
    })
}

fn zust_level(g: &[HolderFunction], d: usize, level: u32) -> f64 {
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let total = n.pow(d as u32);
    det_sum(total, |flat| {
        let mut rem = flat;
        let mut corner = vec![0.0; d];
        for i in (0..d).rev() {
            corner[i] = (rem % n) as f64 * h;
            rem /= n;
        }
        let g0 = g[0].eval(&corner)[0];
        if g0 == 0.0 {
            return 0.0;
        }
        let base: Vec<f64> = (1..=d).map(|i| g[i].eval(&corner)[0]).collect();
        let mut mat = vec![vec![0.0; d]; d];
        for (_j, col) in mat.iter_mut().enumerate().take(d) {
            let _ = col;
        }
        for j in 0..d {
            let mut shifted = corner.clone();
            shifted[j] += h;
            for i in 0..d {
                mat[i][j] = g[i + 1].eval(&shifted)[0] - base[i];
            }
        }
        g0 * det_small(&mut mat)
    })
}

// ---------------------------------------------------------------------------
// Multiscale wedge product
// ---------------------------------------------------------------------------

/// A form together with its smoothing stages `ω_n` (width `2^-n`).
pub struct MultiscaleForm {
    pub d: usize,
    pub m: usize,
    pub alpha: f64,
    stages: Arc<dyn Fn(u32) -> Result<SampledForm> + Send + Sync>,
}

impl MultiscaleForm {
    /// Componentwise mollification of Hölder components.
    pub fn from_holder_components(
        d: usize,
        m: usize,
        alpha: f64,
        comps: Vec<HolderFunction>,
    ) -> Result<Self> {
        let want = multi_indices(d, m).len();
        if comps.len() != want {
            return Err(precondition(format!(
                "degree-{m} form needs {want} components, got {}",
                comps.len()
            )));
        }
        let comps = Arc::new(comps);
        Ok(MultiscaleForm {
            d,
            m,
            alpha,
            stages: Arc::new(move |n: u32| {
                let eps = pow2(-(n as i32));
                let fields: Result<Vec<ScalarField>> = comps
                    .iter()
                    .map(|h| Ok(ScalarField::from_smoothed(&mollify(h, eps)?)))
                    .collect();
                SampledForm::new(d, m, alpha, fields?)
            }),
        })
    }

    /// A smooth form reused at every stage.
    pub fn from_smooth(form: SampledForm) -> Self {
        let f = Arc::new(form.clone());
        MultiscaleForm {
            d: form.d,
            m: form.m,
            alpha: form.alpha,
            stages: Arc::new(move |_| Ok((*f).clone())),
        }
    }

    /// The top-degree form `dg¹ ∧ … ∧ dg^d` assembled from the exact
    /// gradients of the mollified potentials: stage `n` has single component
    /// `det(∂_j (g^i * Φ_(2^-n)))`.
    pub fn gradient_wedge(g: Vec<HolderFunction>, alpha: f64) -> Result<Self> {
        let d = g.first().map(|f| f.d()).unwrap_or(0);
        if g.len() != d {
            return Err(precondition("gradient wedge needs d potentials"));
        }
        let g = Arc::new(g);
        Ok(MultiscaleForm {
            d,
            m: d,
            alpha,
            stages: Arc::new(move |n: u32| {
                let eps = pow2(-(n as i32));
                let smoothed: Result<Vec<crate::holder::SmoothedFn>> =
                    g.iter().map(|f| mollify(f, eps)).collect();
                let smoothed = Arc::new(smoothed?);
                let field = ScalarField::from_fn(move |x: &[f64]| {
                    let dd = x.len();
                    let mut mat = vec![vec![0.0; dd]; dd];
                    for (i, s) in smoothed.iter().enumerate() {
                        let gr = s.grad(x);
                        mat[i][..dd].copy_from_slice(&gr[0][..dd]);
                    }
                    det_small(&mut mat)
                });
                SampledForm::new(d, d, alpha, vec![field])
            }),
        })
    }

    pub fn stage(&self, n: u32) -> Result<SampledForm> {
        (self.stages)(n)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct WedgeSeries {
    pub value: f64,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// geometric tail bound from the measured envelope
    pub tail_bound: f64,
    /// measured envelope constant: max |term_n| 2^(n(α+β-1))
    pub kappa_hat: f64,
    /// certified multiscale constant C(α+β-1, 1) when defined
    pub c_multiscale: Option<f64>,
    pub truncated_at: u32,
}

/// Evaluate `⟨ω ∧ η, T⟩` through the telescoped two-sided series
/// `ω_0∧η_0 + Σ_n (ω_{n+1}∧(η_{n+1}-η_n) + (ω_{n+1}-ω_n)∧η_n)`,
/// with quadrature on `T` refined to level `n+2` at stage `n`, truncating
/// once the measured geometric tail drops below `tol` (or at `n_max`).
pub fn wedge_eval(
    omega: &MultiscaleForm,
    eta: &MultiscaleForm,
    t: &Chain,
    n_max: u32,
    tol: f64,
) -> Result<WedgeSeries> {
    if omega.alpha + eta.alpha <= 1.0 {
        return Err(precondition(format!(
            "wedge product needs alpha + beta > 1, got {} + {}",
            omega.alpha, eta.alpha
        )));
    }
    if omega.m + eta.m != t.degree() {
        return Err(precondition(format!(
            "wedge degree {} + {} must match the chain degree {}",
            omega.m,
            eta.m,
            t.degree()
        )));
    }
    let decay = omega.alpha + eta.alpha - 1.0;
    let mut terms = Vec::new();
    let mut partials = Vec::new();
    let w0 = omega.stage(0)?;
    let e0 = eta.stage(0)?;
    let t0 = refine_to_mesh(t, 2)?;
    let first = form_eval(&w0.wedge(&e0), &t0)?;
    terms.push(first);
    partials.push(first);
    let mut acc = first;
    let mut kappa: f64 = 0.0;
    let mut truncated_at = 0;
    let mut prev_w = w0;
    let mut prev_e = e0;
    for n in 0..n_max {
        let wn1 = omega.stage(n + 1)?;
        let en1 = eta.stage(n + 1)?;
        let tn = refine_to_mesh(t, (n + 2) as i32)?;
        // the two one-sided halves of the telescoped product
        let half1 = form_eval(&wn1.wedge(&en1.sub(&prev_e)), &tn)?;
        let half2 = form_eval(&wn1.sub(&prev_w).wedge(&prev_e), &tn)?;
        let tval = half1 + half2;
        acc += tval;
        terms.push(tval);
        partials.push(acc);
        kappa = kappa.max(tval.abs() * 2f64.powf(n as f64 * decay));
        truncated_at = n + 1;
        let tail = kappa * 2f64.powf(-((n + 1) as f64) * decay) / (1.0 - 2f64.powf(-decay));
        if n >= 2 && tail < tol {
            break;
        }
        prev_w = wn1;
        prev_e = en1;
    }
    let tail_bound =
        kappa * 2f64.powf(-(truncated_at as f64) * decay) / (1.0 - 2f64.powf(-decay));
    let c_multiscale = if decay < 1.0 {
        crate::flatnorm::lp_constant(decay, 1.0).ok()
    } else {
        None
    };
    Ok(WedgeSeries {
        value: acc,
        terms,
        partial_sums: partials,
        tail_bound,
        kappa_hat: kappa,
        c_multiscale,
        truncated_at,
    })
}

/// Gap in the product rule pairing at a matched stage:
/// `⟨ω_N ∧ η_N, ∂T⟩ - ⟨dω_N ∧ η_N, T⟩ - (-1)^m ⟨ω_N ∧ dη_N, T⟩`.
pub fn leibniz_check(
    omega: &MultiscaleForm,
    eta: &MultiscaleForm,
    t: &Chain,
    stage: u32,
) -> Result<f64> {
    if omega.alpha + eta.alpha <= 1.0 {
        return Err(precondition("product rule check needs alpha + beta > 1"));
    }
    let w = omega.stage(stage)?;
    let e = eta.stage(stage)?;
    let tn = refine_to_mesh(t, (stage + 2) as i32)?;
    let btn = tn.boundary()?;
    let lhs = form_eval(&w.wedge(&e), &btn)?;
    let d_w = w.exterior_derivative()?;
    let d_e = e.exterior_derivative()?;
    let r1 = form_eval(&d_w.wedge(&e), &tn)?;
    let sign = if omega.m % 2 == 0 { 1.0 } else { -1.0 };
    let r2 = form_eval(&w.wedge(&d_e), &tn)?;
    Ok((lhs - r1 - sign * r2).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::boundary;
    use crate::holder::{lift_to_plane, weierstrass, SpectralForm};
    use approx::assert_relative_eq;

    fn unit_square() -> Chain {
        Chain::Cubical(CubicalChain::unit_cube(2))
    }

    #[test]
    fn constant_area_form() {
        let w = SampledForm::monomial(2, &[0, 1], 1.0);
        assert_relative_eq!(form_eval(&w, &unit_square()).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_on_cycle_vanishes() {
        let w = SampledForm::monomial(2, &[0], 1.0);
        let b = unit_square().boundary().unwrap();
        assert_relative_eq!(form_eval(&w, &b).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn area_via_boundary() {
        // x1 dx2 on the square boundary gives the area
        let comps = vec![
            ScalarField::constant(0.0, 2),
            ScalarField::from_fn_with_grad(|x: &[f64]| x[0], |_| vec![1.0, 0.0]),
        ];
        let w = SampledForm::new(2, 1, 1.0, comps).unwrap();
        let b = unit_square().boundary().unwrap();
        assert_relative_eq!(form_eval(&w, &b).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degree_mismatch_is_error() {
        let w = SampledForm::monomial(2, &[0], 1.0);
        assert!(form_eval(&w, &unit_square()).is_err());
    }

    #[test]
    fn form_eval_is_bilinear() {
        let w1 = SampledForm::monomial(2, &[0], 0.7);
        let comps = vec![
            ScalarField::from_fn(|x: &[f64]| (3.0 * x[1]).sin()),
            ScalarField::from_fn(|x: &[f64]| x[0] * x[0]),
        ];
        let w2 = SampledForm::new(2, 1, 1.0, comps).unwrap();
        let b = unit_square().boundary().unwrap();
        let combo = w1.sub(&w2.sub(&w1)); // 2*w1 - w2
        let v = form_eval(&combo, &b).unwrap();
        let v1 = form_eval(&w1, &b).unwrap();
        let v2 = form_eval(&w2, &b).unwrap();
        assert_relative_eq!(v, 2.0 * v1 - v2, epsilon = 1e-12);
        // linear in the chain
        let b2 = match &b {
            Chain::Cubical(c) => Chain::Cubical(c.scale(-1.5)),
            _ => unreachable!(),
        };
        assert_relative_eq!(
            form_eval(&w2, &b2).unwrap(),
            -1.5 * v2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn stokes_on_polynomial_form() {
        // x1 dx2 over the square at level 8
        let comps = vec![
            ScalarField::constant(0.0, 2),
            ScalarField::from_fn_with_grad(|x: &[f64]| x[0], |_| vec![1.0, 0.0]),
        ];
        let w = SampledForm::new(2, 1, 1.0, comps).unwrap();
        let t = refine_to_mesh(&unit_square(), 8).unwrap();
        let (lhs, rhs, gap) = stokes_check(&w, &t).unwrap();
        assert_relative_eq!(lhs, 1.0, epsilon = 1e-10);
        assert_relative_eq!(rhs, 1.0, epsilon = 1e-10);
        assert!(gap <= 1e-3);
        // constant form: both sides vanish
        let c = SampledForm::monomial(2, &[0], 2.5);
        let (l2, r2, g2) = stokes_check(&c, &t).unwrap();
        assert!(l2.abs() < 1e-12 && r2.abs() < 1e-12 && g2 < 1e-12);
    }

    #[test]
    fn young_linear_case() {
        let id = HolderFunction::new(
            1.0,
            1.0,
            vec![0.0],
            vec![1.0],
            1,
            true,
            "t",
            Arc::new(|x: &[f64]| vec![x[0]]),
        );
        let r = young_1d(&id, &id, 12).unwrap();
        assert!((r.value - 0.5).abs() <= (0.5f64).powi(12));
        // smooth powers: int t^a d(t^b) = b/(a+b)
        let ta = HolderFunction::new(
            1.0,
            2.0,
            vec![0.0],
            vec![1.0],
            1,
            true,
            "t^2",
            Arc::new(|x: &[f64]| vec![x[0] * x[0]]),
        );
        let tb = HolderFunction::new(
            1.0,
            3.0,
            vec![0.0],
            vec![1.0],
            1,
            true,
            "t^3",
            Arc::new(|x: &[f64]| vec![x[0] * x[0] * x[0]]),
        );
        let r = young_1d(&ta, &tb, 12).unwrap();
        assert!((r.value - 3.0 / 5.0).abs() < 2e-3, "value {}", r.value);
        assert!(r.cauchy_pass);
    }

    #[test]
    fn young_rough_pair_rates() {
        // quadratic-variation correction decays like 2^(-L(2a-1))
        let w = weierstrass(0.7, 2.0, 16, 0.0).unwrap();
        let r = young_1d(&w, &w, 12).unwrap();
        assert!(r.cauchy_pass, "increments {:?}", r.increments);
        let rate = r.rate_log2.unwrap();
        let predicted = -(0.4f64);
        assert!(
            (rate - predicted).abs() <= 0.3 * predicted.abs(),
            "rate {rate} vs {predicted}"
        );
        // below the threshold the sums do not settle
        let w45 = weierstrass(0.45, 2.0, 16, 0.0).unwrap();
        let r45 = young_1d(&w45, &w45, 12).unwrap();
        assert!(!r45.cauchy_pass, "increments {:?}", r45.increments);
    }

    #[test]
    fn zust_affine_exactness() {
        // g0 = 1, g_i affine: value = det(gradients) at every level
        let mk_affine = |a: f64, b: f64, c: f64| {
            HolderFunction::new(
                1.0,
                (a.abs() + b.abs()).max(1e-9),
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                1,
                true,
                "affine",
                Arc::new(move |x: &[f64]| vec![a * x[0] + b * x[1] + c]),
            )
        };
        let one = HolderFunction::new(
            1.0,
            1e-9,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1,
            true,
            "1",
            Arc::new(|_: &[f64]| vec![1.0]),
        );
        let g1 = mk_affine(2.0, 1.0, 0.3);
        let g2 = mk_affine(-0.5, 1.5, -0.1);
        let r = zust_integral(&[one.clone(), g1, g2], 6).unwrap();
        let expect = 2.0 * 1.5 - 1.0 * (-0.5);
        for s in &r.sums {
            assert_relative_eq!(*s, expect, epsilon = 1e-10);
        }
        // coordinates give the volume
        let x1 = mk_affine(1.0, 0.0, 0.0);
        let x2 = mk_affine(0.0, 1.0, 0.0);
        let r = zust_integral(&[one, x1, x2], 6).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zust_is_alternating() {
        let one = HolderFunction::new(
            1.0,
            1e-9,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1,
            true,
            "1",
            Arc::new(|_: &[f64]| vec![1.0]),
        );
        let w = weierstrass(0.8, 2.0, 10, 0.0).unwrap();
        let g1 = {
            let lifted = lift_to_plane(&w, 1).unwrap();
            // x1 + 0.2 W(x2)
            let mut forms = lifted.spectral.clone().unwrap();
            forms[0].linear = vec![1.0, 0.0];
            for wv in &mut forms[0].waves {
                wv.1 *= 0.2;
            }
            let f2 = forms[0].clone();
            HolderFunction::new(
                0.8,
                1.0 + 0.2 * w.holder_constant,
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                1,
                true,
                "x1+0.2W(x2)",
                Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
            )
            .with_spectral(forms)
        };
        let g2 = {
            let form = SpectralForm { constant: 0.0, linear: vec![0.0, 1.0], waves: vec![] };
            let f2 = form.clone();
            HolderFunction::new(
                1.0,
                1.0,
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                1,
                true,
                "x2",
                Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
            )
            .with_spectral(vec![form])
        };
        let fwd = zust_integral(&[one.clone(), g1.clone(), g2.clone()], 7).unwrap();
        let rev = zust_integral(&[one, g2, g1], 7).unwrap();
        for (a, b) in fwd.sums.iter().zip(&rev.sums) {
            assert_relative_eq!(*a, -b, epsilon = 1e-12);
        }
        // the structured case is exact at every level
        for s in &fwd.sums {
            assert_relative_eq!(*s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn wedge_smooth_constants_exact_at_stage_zero() {
        let w = MultiscaleForm::from_smooth(SampledForm::monomial(2, &[0], 2.0));
        let e = MultiscaleForm::from_smooth(SampledForm::monomial(2, &[1], 3.0));
        let r = wedge_eval(&w, &e, &unit_square(), 5, 0.0).unwrap();
        assert_relative_eq!(r.value, 6.0, epsilon = 1e-12);
        for t in &r.terms[1..] {
            assert!(t.abs() < 1e-12, "series terms should vanish: {t}");
        }
    }

    #[test]
    fn wedge_hypothesis_and_degree_errors() {
        let w = MultiscaleForm::from_smooth(SampledForm::monomial(2, &[0], 1.0));
        let mut e = MultiscaleForm::from_smooth(SampledForm::monomial(2, &[1], 1.0));
        e.alpha = -0.5;
        assert!(wedge_eval(&w, &e, &unit_square(), 3, 0.0).is_err());
        let e2 = MultiscaleForm::from_smooth(SampledForm::monomial(2, &[1], 1.0));
        let seg = {
            let mut s = SimplicialChain::zero(2, 1);
            s.push(vec![vec![0.0, 0.0], vec![1.0, 0.0]], 1.0);
            Chain::Simplicial(s)
        };
        assert!(wedge_eval(&w, &e2, &seg, 3, 0.0).is_err());
    }

    #[test]
    fn wedge_antisymmetry() {
        // two rough 1-forms with alpha + beta > 1
        let wa = lift_to_plane(&weierstrass(0.8, 2.0, 8, 0.0).unwrap(), 0).unwrap();
        let wb = lift_to_plane(&weierstrass(0.9, 2.0, 8, 0.5).unwrap(), 1).unwrap();
        let zero = HolderFunction::new(
            1.0,
            1e-12,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1,
            true,
            "0",
            Arc::new(|_: &[f64]| vec![0.0]),
        )
        .with_spectral(vec![SpectralForm { constant: 0.0, linear: vec![0.0, 0.0], waves: vec![] }]);
        let omega =
            MultiscaleForm::from_holder_components(2, 1, 0.8, vec![wa.clone(), zero.clone()])
                .unwrap();
        let eta =
            MultiscaleForm::from_holder_components(2, 1, 0.9, vec![zero, wb.clone()]).unwrap();
        let fwd = wedge_eval(&omega, &eta, &unit_square(), 5, 0.0).unwrap();
        let rev = wedge_eval(&eta, &omega, &unit_square(), 5, 0.0).unwrap();
        // m m' = 1: sign flip
        let bar = fwd.tail_bound + rev.tail_bound + 1e-10;
        assert!(
            (fwd.value + rev.value).abs() <= bar,
            "fwd {} rev {} bar {bar}",
            fwd.value,
            rev.value
        );
    }

    #[test]
    fn wedge_cross_validates_corner_integral() {
        // g0 = 1; eta = d(x1 + 0.2 W(x2)) ^ d(x2): exact value 1
        let w = weierstrass(0.8, 2.0, 10, 0.0).unwrap();
        let g1 = {
            let lifted = lift_to_plane(&w, 1).unwrap();
            let mut forms = lifted.spectral.clone().unwrap();
            forms[0].linear = vec![1.0, 0.0];
            for wv in &mut forms[0].waves {
                wv.1 *= 0.2;
            }
            let f2 = forms[0].clone();
            HolderFunction::new(
                0.8,
                1.0 + 0.2 * w.holder_constant,
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                1,
                true,
                "x1+0.2W(x2)",
                Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
            )
            .with_spectral(forms)
        };
        let g2 = {
            let form = SpectralForm { constant: 0.0, linear: vec![0.0, 1.0], waves: vec![] };
            let f2 = form.clone();
            HolderFunction::new(
                1.0,
                1.0,
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                1,
                true,
                "x2",
                Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
            )
            .with_spectral(vec![form])
        };
        let one = HolderFunction::new(
            1.0,
            1e-9,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            1,
            true,
            "1",
            Arc::new(|_: &[f64]| vec![1.0]),
        )
        .with_spectral(vec![SpectralForm {
            constant: 1.0,
            linear: vec![0.0, 0.0],
            waves: vec![],
        }]);
        let zr = zust_integral(&[one.clone(), g1.clone(), g2.clone()], 8).unwrap();
        let omega = MultiscaleForm::from_holder_components(2, 0, 1.0, vec![one]).unwrap();
        let eta = MultiscaleForm::gradient_wedge(vec![g1, g2], 0.8).unwrap();
        let we = wedge_eval(&omega, &eta, &unit_square(), 5, 1e-4).unwrap();
        let zbar = zr.increments.last().copied().unwrap_or(0.0) * 4.0;
        let bar = we.tail_bound + zbar + 1e-9;
        assert!(
            (we.value - zr.value).abs() <= bar.max(1e-6),
            "wedge {} vs corner {} (bar {bar})",
            we.value,
            zr.value
        );
        assert_relative_eq!(we.value, 1.0, epsilon = 1e-6);
        assert_relative_eq!(zr.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn leibniz_gap_small_for_polynomials() {
        // f = x1^2 (0-form), eta = x2 dx1
        let f = SampledForm::new(
            2,
            0,
            1.0,
            vec![ScalarField::from_fn_with_grad(
                |x: &[f64]| x[0] * x[0],
                |x: &[f64]| vec![2.0 * x[0], 0.0],
            )],
        )
        .unwrap();
        let eta = SampledForm::new(
            2,
            1,
            1.0,
            vec![
                ScalarField::from_fn_with_grad(|x: &[f64]| x[1], |_| vec![0.0, 1.0]),
                ScalarField::constant(0.0, 2),
            ],
        )
        .unwrap();
        let gap = leibniz_check(
            &MultiscaleForm::from_smooth(f),
            &MultiscaleForm::from_smooth(eta),
            &unit_square(),
            6,
        )
        .unwrap();
        assert!(gap <= 1e-3, "gap {gap}");
        // constants: gap identically zero
        let c0 = MultiscaleForm::from_smooth(SampledForm::new(
            2,
            0,
            1.0,
            vec![ScalarField::constant(2.0, 2)],
        ).unwrap());
        let c1 = MultiscaleForm::from_smooth(SampledForm::monomial(2, &[1], 3.0));
        let gap = leibniz_check(&c0, &c1, &unit_square(), 4).unwrap();
        assert!(gap < 1e-12);
    }

    #[test]
    fn gauss_green_over_fractal_chain() {
        // mollified rough 1-form paired with the snowflake interior chains:
        // the Stokes gap vanishes at first order as the smoothing is fixed
        // and the quadrature refines, and is stable as the width halves
        let flake = crate::fractal::koch_snowflake(5);
        let wc = crate::fractal::whitney_chain(&flake, 0.4, 6).unwrap();
        let wa = lift_to_plane(&weierstrass(0.5, 2.0, 8, 0.0).unwrap(), 1).unwrap();
        let wb = lift_to_plane(&weierstrass(0.5, 2.0, 8, 0.4).unwrap(), 0).unwrap();
        for eps_level in [3u32, 4] {
            let eps = pow2(-(eps_level as i32));
            let sa = mollify(&wa, eps).unwrap();
            let sb = mollify(&wb, eps).unwrap();
            let omega = SampledForm::new(
                2,
                1,
                0.5,
                vec![ScalarField::from_smoothed(&sa), ScalarField::from_smoothed(&sb)],
            )
            .unwrap();
            let scale = pow2(wc.whitney.scale_log2);
            let _ = scale;
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for part in &wc.decomposition.parts {
                let Chain::Cubical(c) = part else { panic!() };
                // quadrature cells well below both the cube size and the
                // smoothing width
                let target = (c.level + 2).max(eps_level as i32 + 4);
                let fine = crate::grid::refine(c, target).unwrap();
                let t = Chain::Cubical(fine);
                let dw = omega.exterior_derivative().unwrap();
                lhs += form_eval(&dw, &t).unwrap();
                rhs += form_eval(&omega, &t.boundary().unwrap()).unwrap();
            }
            let gap = (lhs - rhs).abs();
            assert!(gap <= 1e-2, "eps level {eps_level}: gap {gap}");
        }
    }
}
