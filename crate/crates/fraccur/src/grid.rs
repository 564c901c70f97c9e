//! Dyadic cubical and simplicial chains in `R^d`.
//!
//! A [`DyadicFace`] is an axis-aligned `m`-face of the dyadic grid at some
//! level `k` (grid spacing `2^-k`, negative levels allowed). A
//! [`CubicalChain`] is a finite real combination of such faces, all sharing a
//! level and a degree. A [`SimplicialChain`] carries weighted oriented
//! simplices with explicit vertex coordinates; it is the natural home for
//! images of chains under maps and for cones.
//!
//! Orientation convention: the face with spanned axes `i_1 < … < i_m` carries
//! the orientation `e_{i_1} ∧ … ∧ e_{i_m}`, and the boundary of a single face
//! is `Σ_j (-1)^(j-1) (front_j - back_j)`, where `front_j`/`back_j` are the
//! two faces obtained by dropping axis `i_j` at its far/near wall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{precondition, Error, Result};

/// Coefficients with modulus below `DROP_TOL * max|coeff|` are treated as zero
/// when canonicalizing and comparing chains.
pub const DROP_TOL: f64 = 1e-12;

/// Exact power of two, valid for the level/degree ranges used here.
#[inline]
pub fn pow2(e: i32) -> f64 {
    (2.0f64).powi(e)
}

/// An axis-aligned `m`-face of the dyadic grid at a given level.
///
/// The realization is `∏_i [base_i 2^-k, (base_i + δ_i) 2^-k]` with `δ_i = 1`
/// exactly for the spanned axes. Axes are 0-based, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicFace {
    pub base: Vec<i64>,
    pub axes: Vec<u8>,
}

impl DyadicFace {
    pub fn new(base: Vec<i64>, axes: Vec<u8>) -> Self {
        debug_assert!(axes.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(axes.iter().all(|&a| (a as usize) < base.len()));
        DyadicFace { base, axes }
    }

    pub fn degree(&self) -> usize {
        self.axes.len()
    }

    /// `m`-volume of the face at grid level `k`: exactly `2^(-k m)`.
    pub fn volume(&self, level: i32) -> f64 {
        pow2(-level * self.degree() as i32)
    }

    /// Vertex coordinates of the face (2^m corners), in binary-counter order
    /// over the spanned axes.
    pub fn vertices(&self, level: i32) -> Vec<Vec<f64>> {
        let h = pow2(-level);
        let m = self.degree();
        let mut out = Vec::with_capacity(1 << m);
        for mask in 0..(1u32 << m) {
            let mut v: Vec<f64> = self.base.iter().map(|&b| b as f64 * h).collect();
            for (j, &a) in self.axes.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    v[a as usize] += h;
                }
            }
            out.push(v);
        }
        out
    }
}

/// Sparse real combination of dyadic `m`-faces sharing one grid level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubicalChain {
    /// Ambient dimension `d`.
    pub d: usize,
    /// Degree `m` of every face.
    pub m: usize,
    /// Grid level (spacing `2^-level`); may be negative.
    pub level: i32,
    /// Face -> coefficient; zero coefficients are absent.
    pub terms: BTreeMap<DyadicFace, f64>,
}

impl CubicalChain {
    pub fn zero(d: usize, m: usize, level: i32) -> Self {
        CubicalChain { d, m, level, terms: BTreeMap::new() }
    }

    pub fn from_terms<I>(d: usize, m: usize, level: i32, terms: I) -> Self
    where
        I: IntoIterator<Item = (DyadicFace, f64)>,
    {
        let mut c = Self::zero(d, m, level);
        for (f, w) in terms {
            c.add_term(f, w);
        }
        c
    }

    /// Unit cube `[0,1]^d` as a top-dimensional chain at level 0.
    pub fn unit_cube(d: usize) -> Self {
        let face = DyadicFace::new(vec![0; d], (0..d as u8).collect());
        Self::from_terms(d, d, 0, [(face, 1.0)])
    }

    /// Axis-aligned box of cells `[lo, hi)` (cell indices at `level`), each
    /// top-dimensional cell with coefficient 1.
    pub fn cell_box(d: usize, level: i32, lo: &[i64], hi: &[i64]) -> Self {
        let mut c = Self::zero(d, d, level);
        let axes: Vec<u8> = (0..d as u8).collect();
        let mut idx = lo.to_vec();
        'outer: loop {
            c.add_term(DyadicFace::new(idx.clone(), axes.clone()), 1.0);
            for a in 0..d {
                idx[a] += 1;
                if idx[a] < hi[a] {
                    continue 'outer;
                }
                idx[a] = lo[a];
            }
            break;
        }
        c
    }

    pub fn add_term(&mut self, face: DyadicFace, coeff: f64) {
        debug_assert_eq!(face.base.len(), self.d);
        debug_assert_eq!(face.degree(), self.m);
        let w = self.terms.entry(face).or_insert(0.0);
        *w += coeff;
        if *w == 0.0 {
            let key = self
                .terms
                .iter()
                .find(|(_, &v)| v == 0.0)
                .map(|(k, _)| k.clone());
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        if c == 0.0 {
            out.terms.clear();
            return out;
        }
        for w in out.terms.values_mut() {
            *w *= c;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.d, self.m), (other.d, other.m));
        assert_eq!(self.level, other.level, "chains must share a grid level");
        let mut out = self.clone();
        for (f, &w) in &other.terms {
            out.add_term(f.clone(), w);
        }
        out.drop_small();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Remove coefficients below `DROP_TOL * max|coeff|`.
    pub fn drop_small(&mut self) {
        let max = self.terms.values().fold(0.0f64, |a, &b| a.max(b.abs()));
        if max == 0.0 {
            self.terms.clear();
            return;
        }
        let tol = DROP_TOL * max;
        self.terms.retain(|_, w| w.abs() > tol);
    }

    pub fn is_zero(&self) -> bool {
        let mut c = self.clone();
        c.drop_small();
        c.terms.is_empty()
    }

    /// Cell-index bounding box `(lo, hi)` at this chain's level, `hi`
    /// exclusive per axis; `None` for the zero chain.
    pub fn bbox(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        if self.terms.is_empty() {
            return None;
        }
        let mut lo = vec![i64::MAX; self.d];
        let mut hi = vec![i64::MIN; self.d];
        for (f, _) in &self.terms {
            for i in 0..self.d {
                let ext = if f.axes.contains(&(i as u8)) { 1 } else { 0 };
                lo[i] = lo[i].min(f.base[i]);
                hi[i] = hi[i].max(f.base[i] + ext);
            }
        }
        // a point-like extent still occupies its corner
        for i in 0..self.d {
            if hi[i] <= lo[i] {
                hi[i] = lo[i] + 1;
            }
        }
        Some((lo, hi))
    }
}

/// Boundary of a cubical chain. Errors on degree 0.
pub fn boundary(chain: &CubicalChain) -> Result<CubicalChain> {
    if chain.m == 0 {
        return Err(precondition("boundary of a 0-chain is undefined"));
    }
    let mut out = CubicalChain::zero(chain.d, chain.m - 1, chain.level);
    for (face, &w) in &chain.terms {
        for (j, &axis) in face.axes.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let sub_axes: Vec<u8> =
                face.axes.iter().copied().filter(|&a| a != axis).collect();
            let mut front = face.base.clone();
            front[axis as usize] += 1;
            out.add_term(DyadicFace::new(front, sub_axes.clone()), sign * w);
            out.add_term(DyadicFace::new(face.base.clone(), sub_axes), -sign * w);
        }
    }
    out.drop_small();
    Ok(out)
}

/// Mass `Σ |coeff| · m-volume`.
pub fn mass(chain: &CubicalChain) -> f64 {
    let v = pow2(-chain.level * chain.m as i32);
    // + 0.0 normalizes the empty sum's negative zero
    chain.terms.values().map(|w| w.abs()).sum::<f64>() * v + 0.0
}

/// `mass + mass(boundary)` for `m >= 1`; plain mass for `m = 0`.
pub fn normal_mass(chain: &CubicalChain) -> f64 {
    if chain.m == 0 {
        mass(chain)
    } else {
        mass(chain) + mass(&boundary(chain).expect("m >= 1"))
    }
}

/// Mass-preserving dyadic subdivision down to `target_level`.
pub fn refine(chain: &CubicalChain, target_level: i32) -> Result<CubicalChain> {
    if target_level < chain.level {
        return Err(precondition(format!(
            "refine target level {} is coarser than chain level {}",
            target_level, chain.level
        )));
    }
    let mut cur = chain.clone();
    while cur.level < target_level {
        let mut next = CubicalChain::zero(cur.d, cur.m, cur.level + 1);
        for (face, &w) in &cur.terms {
            let m = face.degree();
            for mask in 0..(1u32 << m) {
                let mut base: Vec<i64> = face.base.iter().map(|&b| 2 * b).collect();
                for (j, &a) in face.axes.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        base[a as usize] += 1;
                    }
                }
                next.add_term(DyadicFace::new(base, face.axes.clone()), w);
            }
        }
        cur = next;
    }
    Ok(cur)
}

// ---------------------------------------------------------------------------
// Simplicial chains
// ---------------------------------------------------------------------------

/// One weighted oriented simplex: `m+1` ordered vertex coordinate vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Simplex {
    pub verts: Vec<Vec<f64>>,
    pub coeff: f64,
}

/// List of weighted oriented `m`-simplices in `R^d`. Degenerate simplices are
/// permitted; they carry zero mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimplicialChain {
    pub d: usize,
    pub m: usize,
    pub simplices: Vec<Simplex>,
}

impl SimplicialChain {
    pub fn zero(d: usize, m: usize) -> Self {
        SimplicialChain { d, m, simplices: Vec::new() }
    }

    pub fn push(&mut self, verts: Vec<Vec<f64>>, coeff: f64) {
        debug_assert_eq!(verts.len(), self.m + 1);
        debug_assert!(verts.iter().all(|v| v.len() == self.d));
        if coeff != 0.0 {
            self.simplices.push(Simplex { verts, coeff });
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.simplices {
            s.coeff *= c;
        }
        if c == 0.0 {
            out.simplices.clear();
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.d, self.m), (other.d, other.m));
        let mut out = self.clone();
        out.simplices.extend(other.simplices.iter().cloned());
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Coordinate bounding box over all vertices; `None` when empty.
    pub fn bbox(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let first = self.simplices.first()?;
        let mut lo = first.verts[0].clone();
        let mut hi = first.verts[0].clone();
        for s in &self.simplices {
            for v in &s.verts {
                for i in 0..self.d {
                    lo[i] = lo[i].min(v[i]);
                    hi[i] = hi[i].max(v[i]);
                }
            }
        }
        Some((lo, hi))
    }

    /// Sort each simplex's vertices lexicographically, folding the permutation
    /// sign into the coefficient; merge equal simplices; drop repeated-vertex
    /// simplices (their alternating coefficient is zero) and tiny terms.
    pub fn canonicalize(&self) -> Self {
        let mut acc: BTreeMap<Vec<OrdKey>, f64> = BTreeMap::new();
        for s in &self.simplices {
            let mut order: Vec<usize> = (0..s.verts.len()).collect();
            // insertion sort, counting transpositions for the sign
            let mut swaps = 0usize;
            for i in 1..order.len() {
                let mut j = i;
                while j > 0 && vec_lt(&s.verts[order[j]], &s.verts[order[j - 1]]) {
                    order.swap(j, j - 1);
                    swaps += 1;
                    j -= 1;
                }
            }
            let sorted: Vec<&Vec<f64>> = order.iter().map(|&i| &s.verts[i]).collect();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
            let key: Vec<OrdKey> = sorted.iter().map(|v| OrdKey::from_vec(v)).collect();
            *acc.entry(key).or_insert(0.0) += sign * s.coeff;
        }
        let max = acc.values().fold(0.0f64, |a, &b| a.max(b.abs()));
        let tol = DROP_TOL * max;
        let mut out = SimplicialChain::zero(self.d, self.m);
        for (key, w) in acc {
            if w.abs() > tol {
                out.simplices.push(Simplex {
                    verts: key.into_iter().map(OrdKey::into_vec).collect(),
                    coeff: w,
                });
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.canonicalize().simplices.is_empty()
    }
}

/// Total-ordering wrapper so vertex coordinate vectors can key a map.
#[derive(Clone, Debug, PartialEq)]
struct OrdKey(Vec<f64>);

impl OrdKey {
    fn from_vec(v: &[f64]) -> Self {
        OrdKey(v.to_vec())
    }
    fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Eq for OrdKey {}
impl PartialOrd for OrdKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

fn vec_lt(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// `m`-volume of a simplex via the Gram determinant of its edge vectors.
pub fn simplex_volume(verts: &[Vec<f64>]) -> f64 {
    let m = verts.len() - 1;
    if m == 0 {
        return 1.0;
    }
    let d = verts[0].len();
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for k in 0..d {
                s += (verts[i + 1][k] - verts[0][k]) * (verts[j + 1][k] - verts[0][k]);
            }
            gram[i][j] = s;
        }
    }
    let det = det_in_place(&mut gram);
    let mut fact = 1.0;
    for i in 2..=m {
        fact *= i as f64;
    }
    if det <= 0.0 {
        0.0
    } else {
        det.sqrt() / fact
    }
}

fn det_in_place(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
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

pub fn simplicial_mass(chain: &SimplicialChain) -> f64 {
    chain
        .simplices
        .iter()
        .map(|s| s.coeff.abs() * simplex_volume(&s.verts))
        .sum::<f64>()
        + 0.0
}

/// Boundary of a simplicial chain: alternating vertex omission.
pub fn simplicial_boundary(chain: &SimplicialChain) -> Result<SimplicialChain> {
    if chain.m == 0 {
        return Err(precondition("boundary of a 0-chain is undefined"));
    }
    let mut out = SimplicialChain::zero(chain.d, chain.m - 1);
    for s in &chain.simplices {
        for omit in 0..s.verts.len() {
            let verts: Vec<Vec<f64>> = s
                .verts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != omit)
                .map(|(_, v)| v.clone())
                .collect();
            let sign = if omit % 2 == 0 { 1.0 } else { -1.0 };
            out.push(verts, sign * s.coeff);
        }
    }
    Ok(out)
}

pub fn simplicial_normal_mass(chain: &SimplicialChain) -> f64 {
    if chain.m == 0 {
        simplicial_mass(chain)
    } else {
        let b = simplicial_boundary(chain).expect("m >= 1").canonicalize();
        simplicial_mass(chain) + simplicial_mass(&b)
    }
}

/// Either chain representation, for operations accepting both.
#[derive(Clone, Debug)]
pub enum Chain {
    Cubical(CubicalChain),
    Simplicial(SimplicialChain),
}

impl Chain {
    pub fn degree(&self) -> usize {
        match self {
            Chain::Cubical(c) => c.m,
            Chain::Simplicial(s) => s.m,
        }
    }

    pub fn ambient(&self) -> usize {
        match self {
            Chain::Cubical(c) => c.d,
            Chain::Simplicial(s) => s.d,
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Chain::Cubical(c) => mass(c),
            Chain::Simplicial(s) => simplicial_mass(s),
        }
    }

    pub fn normal_mass(&self) -> f64 {
        match self {
            Chain::Cubical(c) => normal_mass(c),
            Chain::Simplicial(s) => simplicial_normal_mass(s),
        }
    }

    pub fn boundary(&self) -> Result<Chain> {
        match self {
            Chain::Cubical(c) => Ok(Chain::Cubical(boundary(c)?)),
            Chain::Simplicial(s) => Ok(Chain::Simplicial(simplicial_boundary(s)?)),
        }
    }

    /// Simplicial form: cubical chains go through the standard triangulation.
    pub fn to_simplicial(&self) -> SimplicialChain {
        match self {
            Chain::Cubical(c) => triangulate(c),
            Chain::Simplicial(s) => s.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Triangulation and cones
// ---------------------------------------------------------------------------

/// Kuhn/Freudenthal split of each face into `m!` simplices, vertex paths
/// ordered by the face's spanned axes. Boundary-compatible across shared
/// faces, and orientation-preserving for the `e_{i_1} ∧ … ∧ e_{i_m}`
/// convention.
pub fn triangulate(chain: &CubicalChain) -> SimplicialChain {
    let h = pow2(-chain.level);
    let mut out = SimplicialChain::zero(chain.d, chain.m);
    let m = chain.m;
    for (face, &w) in &chain.terms {
        let base: Vec<f64> = face.base.iter().map(|&b| b as f64 * h).collect();
        let mut perm: Vec<usize> = (0..m).collect();
        permute_all(&mut perm, 0, &mut |p, sign| {
            let mut verts = Vec::with_capacity(m + 1);
            let mut v = base.clone();
            verts.push(v.clone());
            for &j in p.iter() {
                v[face.axes[j] as usize] += h;
                verts.push(v.clone());
            }
            out.push(verts, sign * w);
        });
    }
    out
}

fn permute_all(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize], f64)) {
    let n = perm.len();
    if k == n {
        let mut sign = 1.0;
        let mut seen = vec![false; n];
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let mut len = 0;
            let mut j = i;
            while !seen[j] {
                seen[j] = true;
                j = perm[j];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        f(perm, sign);
        return;
    }
    for i in k..n {
        perm.swap(k, i);
        permute_all(perm, k + 1, f);
        perm.swap(k, i);
    }
}

/// Join of a chain with an apex: each simplex `[v_0,…,v_m]` becomes
/// `[a, v_0,…,v_m]`. Cubical inputs are triangulated first. For `m >= 1`,
/// `∂(a ⧼ T) = T - a ⧼ ∂T` holds exactly as canonical chains; for `m = 0` the
/// boundary is `T - (Σ coeffs)·[[a]]`.
pub fn cone(apex: &[f64], chain: &Chain) -> SimplicialChain {
    let s = chain.to_simplicial();
    let mut out = SimplicialChain::zero(s.d, s.m + 1);
    for sx in &s.simplices {
        let mut verts = Vec::with_capacity(sx.verts.len() + 1);
        verts.push(apex.to_vec());
        verts.extend(sx.verts.iter().cloned());
        out.push(verts, sx.coeff);
    }
    out
}

// ---------------------------------------------------------------------------
// Serialization helpers (chain file format)
// ---------------------------------------------------------------------------

/// On-disk cubical chain: `{"d":..,"m":..,"level":..,"terms":[{base,axes,coeff}]}`.
#[derive(Serialize, Deserialize)]
struct CubicalFile {
    d: usize,
    m: usize,
    level: i32,
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    base: Vec<i64>,
    axes: Vec<u8>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct SimplicialFile {
    d: usize,
    m: usize,
    simplices: Vec<SimplexFile>,
}

#[derive(Serialize, Deserialize)]
struct SimplexFile {
    verts: Vec<Vec<f64>>,
    coeff: f64,
}

pub fn cubical_to_json(chain: &CubicalChain) -> String {
    let file = CubicalFile {
        d: chain.d,
        m: chain.m,
        level: chain.level,
        terms: chain
            .terms
            .iter()
            .map(|(f, &w)| TermFile { base: f.base.clone(), axes: f.axes.clone(), coeff: w })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("serialize")
}

pub fn cubical_from_json(s: &str) -> Result<CubicalChain> {
    let file: CubicalFile = serde_json::from_str(s)?;
    let mut chain = CubicalChain::zero(file.d, file.m, file.level);
    for t in file.terms {
        if t.base.len() != file.d || t.axes.len() != file.m {
            return Err(Error::Config("chain term has inconsistent dimensions".into()));
        }
        chain.add_term(DyadicFace::new(t.base, t.axes), t.coeff);
    }
    Ok(chain)
}

pub fn simplicial_to_json(chain: &SimplicialChain) -> String {
    let file = SimplicialFile {
        d: chain.d,
        m: chain.m,
        simplices: chain
            .simplices
            .iter()
            .map(|s| SimplexFile { verts: s.verts.clone(), coeff: s.coeff })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("serialize")
}

pub fn simplicial_from_json(s: &str) -> Result<SimplicialChain> {
    let file: SimplicialFile = serde_json::from_str(s)?;
    let mut chain = SimplicialChain::zero(file.d, file.m);
    for sx in file.simplices {
        if sx.verts.len() != file.m + 1 || sx.verts.iter().any(|v| v.len() != file.d) {
            return Err(Error::Config("simplex has inconsistent dimensions".into()));
        }
        chain.push(sx.verts, sx.coeff);
    }
    Ok(chain)
}

/// Load a chain file, accepting either representation.
pub fn chain_from_json(s: &str) -> Result<Chain> {
    if s.contains("\"simplices\"") {
        Ok(Chain::Simplicial(simplicial_from_json(s)?))
    } else {
        Ok(Chain::Cubical(cubical_from_json(s)?))
    }
}

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

/// Cached quantities for one part of a decomposition. `flat` may be an upper
/// bound (mass, or a counting bound) rather than the linear-program value;
/// `flat_is_bound` records which.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartStats {
    pub mass: f64,
    pub boundary_mass: f64,
    pub flat: f64,
    pub flat_is_bound: bool,
    pub normal: f64,
}

/// A finite family of chains `T_k` with cached masses and the cost
/// `Σ_k N(T_k)^(1-α) F(T_k)^α`. Witnesses an upper bound for the
/// α-fractional norm of `Σ_k T_k`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub parts: Vec<Chain>,
    pub alpha: f64,
    pub stats: Vec<PartStats>,
    pub cost: f64,
}

impl Decomposition {
    /// Build from parts with the cheap cached values (`flat` = mass bound).
    pub fn with_mass_bounds(parts: Vec<Chain>, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(precondition(format!("alpha {alpha} outside [0,1]")));
        }
        let stats: Vec<PartStats> = parts
            .iter()
            .map(|p| {
                let m = p.mass();
                let bm = if p.degree() >= 1 {
                    p.boundary().map(|b| b.mass()).unwrap_or(0.0)
                } else {
                    0.0
                };
                PartStats {
                    mass: m,
                    boundary_mass: bm,
                    flat: m,
                    flat_is_bound: true,
                    normal: m + bm,
                }
            })
            .collect();
        let cost = cost_from_stats(&stats, alpha);
        Ok(Decomposition { parts, alpha, stats, cost })
    }

    /// Recompute the cost from the cached per-part values.
    pub fn recompute_cost(&self) -> f64 {
        cost_from_stats(&self.stats, self.alpha)
    }
}

pub fn cost_from_stats(stats: &[PartStats], alpha: f64) -> f64 {
    stats
        .iter()
        .map(|s| {
            if s.normal == 0.0 {
                0.0
            } else {
                s.normal.powf(1.0 - alpha) * s.flat.powf(alpha)
            }
        })
        .sum()
}
