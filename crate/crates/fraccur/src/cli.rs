//! Command-line surface: one subcommand per pipeline, reproducible
//! configuration, CSV/JSON emission, and a manifest written next to every
//! output. Exit codes: 0 ok, 2 configuration, 3 precondition, 4 numerical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::Digest;

use crate::fractal::OccupancySet;
use crate::grid::{chain_from_json, Chain};
use crate::holder::HolderFunction;
use crate::sobolev::{GridFunction, QuadOpts};
use crate::young::MultiscaleForm;
use crate::{config_err, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "fraccur", about = "chains on dyadic grids: flat and fractional norms, \
fractional Sobolev seminorms, Whitney decompositions, Hölder pushforwards, degree fields, \
and Young-Züst integration", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for any seeded sampling inside the pipeline.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (falls back to FRACCUR_THREADS, then 1). Outputs are
    /// byte-identical for any value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Flat norm of a chain over its padded bounding complex.
    Flatnorm {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 2)]
        pad: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deform a chain onto the standard eps-grid, reporting residual ratios.
    Deform {
        #[arg(long)]
        chain: PathBuf,
        /// Dyadic width, e.g. "1/16", "0.0625" or "2^-4".
        #[arg(long)]
        eps: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Double-integral fractional seminorm of a grid function.
    Gagliardo {
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fractional perimeter of a {0,1} grid function.
    Perimeter {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dyadic-averaging decomposition with the two-sided cost certificate.
    Decompose {
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long)]
        depth: i32,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box-dimension estimate of a named set over a level range.
    Boxdim {
        /// Set spec, e.g. "koch:7", "disk", "square", "cantor:ratio=0.3333".
        #[arg(long)]
        set: String,
        /// Level range "lo..hi" (inclusive).
        #[arg(long)]
        levels: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Whitney decomposition of an open set, with the per-level counts and
    /// the fractional-cost series.
    Whitney {
        #[arg(long)]
        set: String,
        #[arg(long)]
        kmax: i32,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "emit-decomposition")]
        emit_decomposition: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Staged Hölder pushforward of a chain with the Cauchy monitor.
    Push {
        #[arg(long)]
        chain: PathBuf,
        /// Map spec, e.g. "graphw:a=0.8", "weierstrass2d:a=0.8,amp=0.1",
        /// "zsquare", "identity".
        #[arg(long)]
        map: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        nmax: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brouwer degree field of a planar map on a set, as CSV rows
    /// `y1,y2,degree,flag`.
    Degree {
        #[arg(long)]
        set: String,
        #[arg(long)]
        map: String,
        /// Cells per unit length (a power of two).
        #[arg(long, default_value_t = 256)]
        grid: u32,
        /// Also report the W^{1-beta,1} seminorm of the field.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dyadic left-point Young sums of two 1-D functions.
    Young {
        #[arg(long)]
        g0: String,
        #[arg(long)]
        g1: String,
        #[arg(long, default_value_t = 12)]
        levels: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corner-increment integral of d+1 functions over the unit cube.
    Zust {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        g0: String,
        #[arg(long)]
        g1: String,
        #[arg(long)]
        g2: Option<String>,
        #[arg(long, default_value_t = 10)]
        levels: u32,
        /// "json" or "csv"
        #[arg(long, default_value = "json")]
        report: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multiscale wedge product of two forms evaluated on a chain.
    Wedge {
        #[arg(long)]
        omega: PathBuf,
        #[arg(long)]
        eta: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 6)]
        nmax: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in example battery; exit nonzero on failure.
    Selftest,
    /// Materialize the built-in test corpus into a directory.
    Corpus {
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = cli
        .global
        .threads
        .or_else(|| {
            std::env::var("FRACCUR_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command, &cli.global))
}

fn dispatch(cmd: Command, global: &GlobalOpts) -> Result<()> {
    match cmd {
        Command::Flatnorm { chain, pad, out } => cmd_flatnorm(&chain, pad, out, global),
        Command::Deform { chain, eps, out } => cmd_deform(&chain, &eps, out, global),
        Command::Gagliardo { func, alpha, out } => cmd_gagliardo(&func, alpha, out, global),
        Command::Perimeter { set, alpha, out } => cmd_perimeter(&set, alpha, out, global),
        Command::Decompose { func, depth, alpha, out } => {
            cmd_decompose(&func, depth, alpha, out, global)
        }
        Command::Boxdim { set, levels, out } => cmd_boxdim(&set, &levels, out, global),
        Command::Whitney { set, kmax, alpha, emit_decomposition, out } => {
            cmd_whitney(&set, kmax, alpha, emit_decomposition, out, global)
        }
        Command::Push { chain, map, gamma, alpha, tol, nmax, out } => {
            cmd_push(&chain, &map, gamma, alpha, tol, nmax, out, global)
        }
        Command::Degree { set, map, grid, beta, out } => {
            cmd_degree(&set, &map, grid, beta, out, global)
        }
        Command::Young { g0, g1, levels, out } => cmd_young(&g0, &g1, levels, out, global),
        Command::Zust { d, g0, g1, g2, levels, report, out } => {
            cmd_zust(d, &g0, &g1, g2.as_deref(), levels, &report, out, global)
        }
        Command::Wedge { omega, eta, chain, tol, nmax, out } => {
            cmd_wedge(&omega, &eta, &chain, tol, nmax, out, global)
        }
        Command::Selftest => cmd_selftest(),
        Command::Corpus { out } => cmd_corpus(&out, global),
    }
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest {
    command: String,
    params: serde_json::Value,
    seed: u64,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    measured: serde_json::Value,
    version: String,
}

fn sha256_file(p: &Path) -> Result<String> {
    let bytes = std::fs::read(p)?;
    Ok(hex_digest(&bytes))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut h = sha2::Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

struct Emitter<'a> {
    command: String,
    params: serde_json::Value,
    global: &'a GlobalOpts,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl<'a> Emitter<'a> {
    fn new(command: &str, params: serde_json::Value, global: &'a GlobalOpts) -> Self {
        Emitter {
            command: command.into(),
            params,
            global,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn record_input(&mut self, p: &Path) -> Result<()> {
        self.inputs.insert(p.display().to_string(), sha256_file(p)?);
        Ok(())
    }

    fn write_output(&mut self, p: &Path, contents: &str) -> Result<()> {
        if let Some(dir) = p.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(p, contents)?;
        let key = p
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        self.outputs.insert(key, hex_digest(contents.as_bytes()));
        Ok(())
    }

    fn finish(self, primary_out: Option<&Path>, measured: serde_json::Value) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            params: self.params,
            seed: self.global.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            measured,
            version: env!("CARGO_PKG_VERSION").into(),
        };
        if let Some(out) = primary_out {
            let mpath = out.with_extension("manifest.json");
            std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Mini-language parsers
// ---------------------------------------------------------------------------

fn parse_kv(spec: &str) -> (String, BTreeMap<String, String>) {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.to_string(), r),
        None => (spec.to_string(), ""),
    };
    let mut map = BTreeMap::new();
    for part in rest.split(',') {
        if part.is_empty() {
            continue;
        }
        match part.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                map.insert("arg".into(), part.trim().to_string());
            }
        }
    }
    (name, map)
}

fn kv_f64(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e| config_err(format!("bad {key}={v}: {e}"))),
    }
}

fn kv_usize(map: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e| config_err(format!("bad {key}={v}: {e}"))),
    }
}

/// Parse a 1-D scalar function spec: weierstrass, takagi, fbm, const, csv.
pub fn parse_function(spec: &str, seed: u64) -> Result<HolderFunction> {
    let (name, kv) = parse_kv(spec);
    match name.as_str() {
        "weierstrass" => {
            let a = kv_f64(&kv, "a", 0.5)?;
            let terms = kv_usize(&kv, "terms", 16)?;
            let phase = kv_f64(&kv, "phase", 0.0)?;
            crate::holder::weierstrass(a, 2.0, terms, phase)
        }
        "takagi" => Ok(crate::holder::takagi(kv_usize(&kv, "terms", 16)?)),
        "fbm" => {
            let h = kv_f64(&kv, "h", 0.7)?;
            let s = kv
                .get("seed")
                .map(|v| v.parse::<u64>().map_err(|e| config_err(format!("bad seed: {e}"))))
                .transpose()?
                .unwrap_or(seed);
            crate::holder::fbm_like(h, s)
        }
        "const" => {
            let c = kv_f64(&kv, "arg", kv_f64(&kv, "c", 1.0)?)?;
            Ok(constant_fn(c, 1))
        }
        "csv" => {
            let path = kv
                .get("arg")
                .or_else(|| kv.get("path"))
                .ok_or_else(|| config_err("csv spec needs a path"))?;
            let gamma = kv_f64(&kv, "gamma", 0.5)?;
            load_csv_function(Path::new(path), gamma)
        }
        other => Err(config_err(format!("unknown function spec {other}"))),
    }
}

pub fn constant_fn(c: f64, d: usize) -> HolderFunction {
    let form = crate::holder::SpectralForm { constant: c, linear: vec![0.0; d], waves: vec![] };
    let f2 = form.clone();
    HolderFunction::new(
        1.0,
        1e-12,
        vec![0.0; d],
        vec![1.0; d],
        1,
        true,
        format!("const:{c}"),
        Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
    )
    .with_spectral(vec![form])
}

fn load_csv_function(path: &Path, gamma: f64) -> Result<HolderFunction> {
    let text = std::fs::read_to_string(path)?;
    let vals: Vec<f64> = text
        .split(|c: char| c == ',' || c == '\n')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| config_err(format!("bad value: {e}"))))
        .collect::<Result<_>>()?;
    if vals.len() < 2 {
        return Err(config_err("sampled function needs at least two values"));
    }
    let n = vals.len() - 1;
    let table = Arc::new(vals);
    let t2 = table.clone();
    let mut f = HolderFunction::new(
        gamma,
        1.0,
        vec![0.0],
        vec![1.0],
        1,
        true,
        format!("csv:{}", path.display()),
        Arc::new(move |x: &[f64]| {
            let t = (x[0].clamp(0.0, 1.0)) * n as f64;
            let i = (t.floor() as usize).min(n - 1);
            let frac = t - i as f64;
            vec![t2[i] * (1.0 - frac) + t2[i + 1] * frac]
        }),
    );
    // measured constant over the samples
    let mut maxq: f64 = 1e-12;
    for j in 1..=8 {
        let step = (n >> j).max(1);
        for i in (0..n).step_by(step.max(1)) {
            let k = (i + step).min(n);
            let dt = (k - i) as f64 / n as f64;
            if dt > 0.0 {
                maxq = maxq.max((table[k] - table[i]).abs() / dt.powf(gamma));
            }
        }
    }
    f.holder_constant = 1.25 * maxq;
    Ok(f)
}

/// Parse a planar map spec.
pub fn parse_map(spec: &str, seed: u64) -> Result<HolderFunction> {
    let (name, kv) = parse_kv(spec);
    match name.as_str() {
        "identity" => {
            let forms = vec![
                crate::holder::SpectralForm { constant: 0.0, linear: vec![1.0, 0.0], waves: vec![] },
                crate::holder::SpectralForm { constant: 0.0, linear: vec![0.0, 1.0], waves: vec![] },
            ];
            Ok(HolderFunction::new(
                1.0,
                1.0,
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                2,
                true,
                "identity",
                Arc::new(|x: &[f64]| x.to_vec()),
            )
            .with_spectral(forms))
        }
        "zsquare" => Ok(HolderFunction::new(
            1.0,
            4.0,
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            2,
            true,
            "zsquare",
            Arc::new(|x: &[f64]| vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]]),
        )),
        "graphw" => {
            let a = kv_f64(&kv, "a", 0.8)?;
            let terms = kv_usize(&kv, "terms", 16)?;
            let w = crate::holder::weierstrass(a, 2.0, terms, kv_f64(&kv, "phase", 0.0)?)?;
            Ok(crate::pushforward::graph_map(&w))
        }
        "weierstrass2d" => {
            let a = kv_f64(&kv, "a", 0.8)?;
            let amp = kv_f64(&kv, "amp", 0.1)?;
            let terms = kv_usize(&kv, "terms", 16)?;
            let w = crate::holder::weierstrass(a, 2.0, terms, kv_f64(&kv, "phase", 0.0)?)?;
            crate::pushforward::perturbed_identity(&w, amp)
        }
        _ => {
            // fall back to 1-D function specs used as maps R -> R
            let f = parse_function(spec, seed)?;
            Ok(f)
        }
    }
}

/// Parse a set spec: koch:level, disk[:r=..], square, cantor:ratio=..,
/// star:seed=.., or a grid-function JSON path.
pub fn parse_set(spec: &str) -> Result<OccupancySet> {
    if spec.ends_with(".json") {
        let g = crate::sobolev::read_grid_function(Path::new(spec))?;
        return grid_to_set(&g);
    }
    let (name, kv) = parse_kv(spec);
    match name.as_str() {
        "koch" => {
            let level = kv_usize(&kv, "arg", kv_usize(&kv, "level", 5)?)?;
            Ok(crate::fractal::koch_snowflake(level as u32))
        }
        "disk" => {
            let r = kv_f64(&kv, "r", 1.0)?;
            Ok(crate::fractal::disk([0.0, 0.0], r))
        }
        "square" => Ok(crate::fractal::square()),
        "cantor" => crate::fractal::cantor_product(kv_f64(&kv, "ratio", 1.0 / 3.0)?),
        "star" => {
            let seed = kv_usize(&kv, "seed", 1)? as u64;
            Ok(crate::fractal::star_shaped(seed, kv_usize(&kv, "spikes", 9)?))
        }
        other => Err(config_err(format!("unknown set spec {other}"))),
    }
}

fn grid_to_set(g: &GridFunction) -> Result<OccupancySet> {
    if g.d() != 2 {
        return Err(config_err("raster sets must be planar"));
    }
    let h = crate::grid::pow2(-g.level);
    let mut cells = std::collections::HashSet::new();
    for (i, &v) in g.values.iter().enumerate() {
        if v != 0.0 {
            let dims = g.dims();
            let mut rem = i;
            let mut idx = vec![0i64; 2];
            for k in (0..2).rev() {
                idx[k] = g.lo[k] + (rem % dims[k]) as i64;
                rem /= dims[k];
            }
            cells.insert(idx);
        }
    }
    Ok(OccupancySet {
        d: 2,
        lo: g.lo.iter().map(|&a| a as f64 * h).collect(),
        hi: g.hi.iter().map(|&b| b as f64 * h).collect(),
        kind: crate::fractal::SetKind::Raster { level: g.level, cells },
        boundary: None,
        name: "raster".into(),
    })
}

/// Form spec file: `{"d":2,"m":1,"alpha":0.8,"comps":["weierstrass:a=0.8|axis=1","const:0"]}`.
#[derive(serde::Deserialize, Serialize)]
struct FormSpecFile {
    d: usize,
    m: usize,
    alpha: f64,
    comps: Vec<String>,
    /// optional: build the top form d g1 ^ ... ^ d gd from potentials
    #[serde(default)]
    potentials: Vec<String>,
}

fn parse_form(path: &Path, seed: u64) -> Result<MultiscaleForm> {
    let spec: FormSpecFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if !spec.potentials.is_empty() {
        let pots: Result<Vec<HolderFunction>> = spec
            .potentials
            .iter()
            .map(|s| parse_planar_component(s, seed))
            .collect();
        return MultiscaleForm::gradient_wedge(pots?, spec.alpha);
    }
    let comps: Result<Vec<HolderFunction>> = spec
        .comps
        .iter()
        .map(|s| parse_planar_component(s, seed))
        .collect();
    MultiscaleForm::from_holder_components(spec.d, spec.m, spec.alpha, comps?)
}

/// `spec|axis=k` lifts a 1-D spec along coordinate `k`; optional
/// `|linear=a,b` adds an affine part.
fn parse_planar_component(spec: &str, seed: u64) -> Result<HolderFunction> {
    let mut parts = spec.split('|');
    let base = parts.next().unwrap_or_default();
    let mut axis = 0usize;
    let mut linear: Option<Vec<f64>> = None;
    for extra in parts {
        if let Some(v) = extra.strip_prefix("axis=") {
            axis = v.parse().map_err(|e| config_err(format!("bad axis: {e}")))?;
        } else if let Some(v) = extra.strip_prefix("linear=") {
            let coeffs: Result<Vec<f64>> = v
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| config_err(format!("bad linear: {e}"))))
                .collect();
            linear = Some(coeffs?);
        }
    }
    let f1 = parse_function(base, seed)?;
    let mut lifted = crate::holder::lift_to_plane(&f1, axis)?;
    if let Some(lin) = linear {
        let mut forms = lifted.spectral.clone().expect("lifted spectral");
        forms[0].linear = lin;
        let f2 = forms[0].clone();
        lifted = HolderFunction::new(
            lifted.gamma,
            lifted.holder_constant + 2.0,
            lifted.dom_lo.clone(),
            lifted.dom_hi.clone(),
            1,
            true,
            format!("{spec}"),
            Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
        )
        .with_spectral(forms);
    }
    Ok(lifted)
}

fn parse_eps(s: &str) -> Result<i32> {
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.parse().map_err(|e| config_err(format!("bad eps: {e}")))?;
        let d: f64 = den.parse().map_err(|e| config_err(format!("bad eps: {e}")))?;
        return crate::flatnorm::eps_to_level(n / d);
    }
    if let Some(e) = s.strip_prefix("2^") {
        let k: i32 = e.parse().map_err(|e| config_err(format!("bad eps: {e}")))?;
        return Ok(-k);
    }
    let v: f64 = s.parse().map_err(|e| config_err(format!("bad eps: {e}")))?;
    crate::flatnorm::eps_to_level(v)
}

fn parse_levels(s: &str) -> Result<(i32, i32)> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| config_err("levels must look like lo..hi"))?;
    let lo: i32 = lo.parse().map_err(|e| config_err(format!("bad levels: {e}")))?;
    let hi: i32 = hi
        .trim_start_matches('=')
        .parse()
        .map_err(|e| config_err(format!("bad levels: {e}")))?;
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

fn cmd_flatnorm(chain: &Path, pad: i64, out: Option<PathBuf>, global: &GlobalOpts) -> Result<()> {
    let mut em = Emitter::new(
        "flatnorm",
        serde_json::json!({"chain": chain.display().to_string(), "pad": pad}),
        global,
    );
    em.record_input(chain)?;
    let t = chain_from_json(&std::fs::read_to_string(chain)?)?;
    let Chain::Cubical(c) = &t else {
        return Err(Error::Precondition(
            "flat norms are computed for cubical chains; deform simplicial input first".into(),
        ));
    };
    let domain = crate::flatnorm::ComplexDomain::padded_cover(c, pad)?;
    let r = crate::flatnorm::flat_norm(c, &domain)?;
    let report = serde_json::json!({
        "value": r.value,
        "witness": serde_json::from_str::<serde_json::Value>(
            &crate::grid::cubical_to_json(&r.witness_s))?,
        "residual": serde_json::from_str::<serde_json::Value>(
            &crate::grid::cubical_to_json(&r.residual))?,
        "diagnostics": {"iterations": r.iterations, "optimality_gap": r.optimality_gap},
    });
    let text = serde_json::to_string_pretty(&report)?;
    println!("flat norm: {}", r.value);
    let measured = serde_json::json!({"value": r.value});
    if let Some(out) = out {
        em.write_output(&out, &text)?;
        em.finish(Some(&out), measured)?;
    }
    Ok(())
}

fn cmd_deform(chain: &Path, eps: &str, out: Option<PathBuf>, global: &GlobalOpts) -> Result<()> {
    let mut em = Emitter::new(
        "deform",
        serde_json::json!({"chain": chain.display().to_string(), "eps": eps}),
        global,
    );
    em.record_input(chain)?;
    let t = chain_from_json(&std::fs::read_to_string(chain)?)?;
    let k = parse_eps(eps)?;
    let r = crate::flatnorm::deform(&t, k)?;
    println!(
        "deformed onto the 2^-{k} grid: M(P)={:.6} sweep/epsM={:.4} residual/epsMb={:.4}",
        r.ratios.mass_p, r.ratios.sweep_over_eps_mass, r.ratios.residual_over_eps_boundary
    );
    let report = serde_json::json!({
        "grid_chain": serde_json::from_str::<serde_json::Value>(
            &crate::grid::cubical_to_json(&r.p))?,
        "ratios": r.ratios,
    });
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&report)?)?;
        em.finish(Some(&out), serde_json::to_value(&r.ratios)?)?;
    }
    Ok(())
}

fn cmd_gagliardo(func: &Path, alpha: f64, out: Option<PathBuf>, global: &GlobalOpts) -> Result<()> {
    let mut em = Emitter::new(
        "gagliardo",
        serde_json::json!({"fn": func.display().to_string(), "alpha": alpha}),
        global,
    );
    em.record_input(func)?;
    let u = crate::sobolev::read_grid_function(func)?;
    let r = crate::sobolev::gagliardo(&u, alpha, QuadOpts { richardson: true, ..Default::default() })?;
    println!(
        "gagliardo seminorm: {} (extrapolated {}, error estimate {})",
        r.value, r.extrapolated, r.error_estimate
    );
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&r)?)?;
        em.finish(Some(&out), serde_json::to_value(&r)?)?;
    }
    Ok(())
}

fn cmd_perimeter(set: &Path, alpha: f64, out: Option<PathBuf>, global: &GlobalOpts) -> Result<()> {
    let mut em = Emitter::new(
        "perimeter",
        serde_json::json!({"set": set.display().to_string(), "alpha": alpha}),
        global,
    );
    em.record_input(set)?;
    let u = crate::sobolev::read_grid_function(set)?;
    let r = crate::sobolev::frac_perimeter(&u, alpha, QuadOpts::default())?;
    println!("fractional perimeter: {}", r.value);
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&r)?)?;
        em.finish(Some(&out), serde_json::to_value(&r)?)?;
    }
    Ok(())
}

fn cmd_decompose(
    func: &Path,
    depth: i32,
    alpha: f64,
    out: Option<PathBuf>,
    global: &GlobalOpts,
) -> Result<()> {
    let mut em = Emitter::new(
        "decompose",
        serde_json::json!({"fn": func.display().to_string(), "depth": depth, "alpha": alpha}),
        global,
    );
    em.record_input(func)?;
    let u = crate::sobolev::read_grid_function(func)?;
    let cert = crate::sobolev::equivalence_certificate(&u, alpha, depth, QuadOpts::default())?;
    println!(
        "gagliardo {} vs decomposition cost {} (ratio {})",
        cert.gagliardo, cert.decomposition_cost, cert.ratio
    );
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&cert)?)?;
        em.finish(Some(&out), serde_json::to_value(&cert)?)?;
    }
    Ok(())
}

fn cmd_boxdim(set: &str, levels: &str, out: Option<PathBuf>, global: &GlobalOpts) -> Result<()> {
    let em_params = serde_json::json!({"set": set, "levels": levels});
    let mut em = Emitter::new("boxdim", em_params, global);
    let u = parse_set(set)?;
    // curves measure their boundary when one exists
    let target = match u.boundary {
        Some(_) => u.boundary_set()?,
        None => u,
    };
    let (lo, hi) = parse_levels(levels)?;
    let mut counts = Vec::new();
    for k in lo..=hi {
        counts.push((k, crate::fractal::box_count(&target, k)?));
    }
    let (dim, rms) = crate::fractal::box_dimension(&target, lo..=hi)?;
    println!("box dimension estimate: {dim:.4} (residual rms {rms:.4})");
    let report = serde_json::json!({"dimension": dim, "residual_rms": rms, "counts": counts});
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&report)?)?;
        em.finish(Some(&out), report)?;
    }
    Ok(())
}

fn cmd_whitney(
    set: &str,
    kmax: i32,
    alpha: f64,
    emit: Option<PathBuf>,
    out: Option<PathBuf>,
    global: &GlobalOpts,
) -> Result<()> {
    let mut em = Emitter::new(
        "whitney",
        serde_json::json!({"set": set, "kmax": kmax, "alpha": alpha}),
        global,
    );
    let u = parse_set(set)?;
    let wc = crate::fractal::whitney_chain(&u, alpha, kmax)?;
    println!(
        "whitney: k0={} scale=2^{} levels={} cost={} verdict={:?}",
        wc.whitney.k0,
        wc.whitney.scale_log2,
        wc.whitney.collections.len(),
        wc.decomposition.cost,
        wc.cost_verdict
    );
    let report = serde_json::json!({
        "k0": wc.whitney.k0,
        "scale_log2": wc.whitney.scale_log2,
        "counts": wc.whitney.counts,
        "boundary_counts": wc.whitney.boundary_counts,
        "set_measure": wc.whitney.set_measure,
        "covered_measure": wc.whitney.covered_measure,
        "cost": wc.decomposition.cost,
        "cost_terms": wc.cost_terms,
        "verdict": wc.cost_verdict,
    });
    if let Some(emit) = emit {
        let parts: Vec<serde_json::Value> = wc
            .decomposition
            .parts
            .iter()
            .map(|p| match p {
                Chain::Cubical(c) => {
                    serde_json::from_str(&crate::grid::cubical_to_json(c)).unwrap()
                }
                Chain::Simplicial(s) => {
                    serde_json::from_str(&crate::grid::simplicial_to_json(s)).unwrap()
                }
            })
            .collect();
        let dec = serde_json::json!({
            "alpha": alpha,
            "parts": parts,
            "stats": wc.decomposition.stats,
            "cost": wc.decomposition.cost,
        });
        em.write_output(&emit, &serde_json::to_string_pretty(&dec)?)?;
    }
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&report)?)?;
        em.finish(Some(&out), report)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_push(
    chain: &Path,
    map: &str,
    gamma: f64,
    alpha: f64,
    tol: f64,
    nmax: u32,
    out: Option<PathBuf>,
    global: &GlobalOpts,
) -> Result<()> {
    let mut em = Emitter::new(
        "push",
        serde_json::json!({
            "chain": chain.display().to_string(), "map": map, "gamma": gamma,
            "alpha": alpha, "tol": tol, "nmax": nmax
        }),
        global,
    );
    em.record_input(chain)?;
    let t = chain_from_json(&std::fs::read_to_string(chain)?)?;
    let f = parse_map(map, global.seed)?;
    let run = crate::pushforward::holder_pushforward(&f, gamma, &t, alpha, nmax, tol)?;
    println!(
        "stages {} beta {} verdict {:?}",
        run.stages_run, run.beta, run.verdict
    );
    for (n, d) in run.stage_distances.iter().enumerate() {
        println!("  stage {n}: flat-distance bound {d}");
    }
    let report = serde_json::json!({
        "beta": run.beta,
        "stage_distances": run.stage_distances,
        "stage_sup_steps": run.stage_sup_steps,
        "verdict": run.verdict,
        "image": serde_json::from_str::<serde_json::Value>(
            &crate::grid::simplicial_to_json(&run.chain))?,
    });
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&report)?)?;
        em.finish(
            Some(&out),
            serde_json::json!({
                "beta": run.beta, "stage_distances": run.stage_distances,
                "verdict": run.verdict
            }),
        )?;
    }
    Ok(())
}

fn cmd_degree(
    set: &str,
    map: &str,
    grid: u32,
    beta: Option<f64>,
    out: Option<PathBuf>,
    global: &GlobalOpts,
) -> Result<()> {
    let mut em = Emitter::new(
        "degree",
        serde_json::json!({"set": set, "map": map, "grid": grid, "beta": beta}),
        global,
    );
    if !grid.is_power_of_two() {
        return Err(config_err("grid must be a power of two"));
    }
    let level = grid.trailing_zeros() as i32;
    let u = parse_set(set)?;
    let f = parse_map(map, global.seed)?;
    let field = crate::pushforward::degree_field(&f, &u, level)?;
    let ny = (field.deg.hi[1] - field.deg.lo[1]) as usize;
    let h = crate::grid::pow2(-level);
    let mut csv = String::from("y1,y2,degree,flag\n");
    for (i, &v) in field.deg.values.iter().enumerate() {
        let ix = i / ny;
        let jy = i % ny;
        let y1 = (field.deg.lo[0] + ix as i64) as f64 * h + 0.5 * h;
        let y2 = (field.deg.lo[1] + jy as i64) as f64 * h + 0.5 * h;
        csv.push_str(&format!(
            "{y1},{y2},{v},{}\n",
            if field.flagged[i] { 1 } else { 0 }
        ));
    }
    let mut measured = serde_json::json!({
        "unflagged_cells": field.unflagged_cells(),
        "total_cells": field.deg.values.len(),
    });
    if let Some(beta) = beta {
        let semi = crate::pushforward::degree_regularity(&field, beta)?;
        println!("degree field W^(1-{beta},1) seminorm: {semi}");
        measured["regularity_seminorm"] = serde_json::json!(semi);
    }
    println!(
        "degree field on 2^-{level} grid: {} cells, {} unflagged",
        field.deg.values.len(),
        field.unflagged_cells()
    );
    if let Some(out) = out {
        em.write_output(&out, &csv)?;
        em.finish(Some(&out), measured)?;
    }
    Ok(())
}

fn cmd_young(g0: &str, g1: &str, levels: u32, out: Option<PathBuf>, global: &GlobalOpts) -> Result<()> {
    let mut em = Emitter::new(
        "young",
        serde_json::json!({"g0": g0, "g1": g1, "levels": levels}),
        global,
    );
    let f0 = parse_function(g0, global.seed)?;
    let f1 = parse_function(g1, global.seed)?;
    let r = crate::young::young_1d(&f0, &f1, levels)?;
    println!(
        "young sum: {} (rate {:?} vs predicted {}, cauchy {})",
        r.value, r.rate_log2, r.predicted_rate_log2, r.cauchy_pass
    );
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&r)?)?;
        em.finish(Some(&out), serde_json::to_value(&r)?)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_zust(
    d: usize,
    g0: &str,
    g1: &str,
    g2: Option<&str>,
    levels: u32,
    report: &str,
    out: Option<PathBuf>,
    global: &GlobalOpts,
) -> Result<()> {
    let mut em = Emitter::new(
        "zust",
        serde_json::json!({"d": d, "g0": g0, "g1": g1, "g2": g2, "levels": levels}),
        global,
    );
    let fns: Vec<HolderFunction> = match d {
        1 => vec![
            parse_function(g0, global.seed)?,
            parse_function(g1, global.seed)?,
        ],
        2 => {
            let g2 = g2.ok_or_else(|| config_err("d=2 needs --g2"))?;
            vec![
                parse_planar_component(g0, global.seed)?,
                parse_planar_component(g1, global.seed)?,
                parse_planar_component(g2, global.seed)?,
            ]
        }
        _ => return Err(config_err("corner integrals are implemented for d = 1, 2")),
    };
    let r = crate::young::zust_integral(&fns, levels)?;
    println!(
        "corner integral: {} (rate {:?} vs predicted {}, cauchy {})",
        r.value, r.rate_log2, r.predicted_rate_log2, r.cauchy_pass
    );
    if let Some(out) = out {
        let text = if report == "csv" {
            let mut s = String::from("level,sum,increment\n");
            for (i, v) in r.sums.iter().enumerate() {
                let inc = if i == 0 { f64::NAN } else { r.increments[i - 1] };
                s.push_str(&format!("{},{},{}\n", i + 1, v, inc));
            }
            s
        } else {
            serde_json::to_string_pretty(&r)?
        };
        em.write_output(&out, &text)?;
        em.finish(Some(&out), serde_json::to_value(&r)?)?;
    }
    Ok(())
}

fn cmd_wedge(
    omega: &Path,
    eta: &Path,
    chain: &Path,
    tol: f64,
    nmax: u32,
    out: Option<PathBuf>,
    global: &GlobalOpts,
) -> Result<()> {
    let mut em = Emitter::new(
        "wedge",
        serde_json::json!({
            "omega": omega.display().to_string(), "eta": eta.display().to_string(),
            "chain": chain.display().to_string(), "tol": tol, "nmax": nmax
        }),
        global,
    );
    em.record_input(omega)?;
    em.record_input(eta)?;
    em.record_input(chain)?;
    let w = parse_form(omega, global.seed)?;
    let e = parse_form(eta, global.seed)?;
    let t = chain_from_json(&std::fs::read_to_string(chain)?)?;
    let r = crate::young::wedge_eval(&w, &e, &t, nmax, tol)?;
    println!(
        "wedge value {} ± {} (stages {}, kappa {})",
        r.value, r.tail_bound, r.truncated_at, r.kappa_hat
    );
    if let Some(out) = out {
        em.write_output(&out, &serde_json::to_string_pretty(&r)?)?;
        em.finish(Some(&out), serde_json::to_value(&r)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Selftest and corpus
// ---------------------------------------------------------------------------

fn cmd_selftest() -> Result<()> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let sq = crate::grid::CubicalChain::unit_cube(2);
    let b = crate::grid::boundary(&sq)?;
    check("square boundary has four edges", b.terms.len() == 4);
    check("boundary of boundary vanishes", {
        let cube = crate::grid::CubicalChain::unit_cube(3);
        crate::grid::boundary(&crate::grid::boundary(&cube)?)?.is_zero()
    });
    check("refinement preserves mass", {
        let r = crate::grid::refine(&sq, 3)?;
        (crate::grid::mass(&r) - 1.0).abs() < 1e-12
    });
    check("unit square normal mass is 5", (crate::grid::normal_mass(&sq) - 5.0).abs() < 1e-12);
    check("two-point flat norm follows the distance", {
        let mut t = crate::grid::CubicalChain::zero(1, 0, 3);
        t.add_term(crate::grid::DyadicFace::new(vec![0], vec![]), 1.0);
        t.add_term(crate::grid::DyadicFace::new(vec![3], vec![]), -1.0);
        let domain = crate::flatnorm::ComplexDomain::padded_cover(&t, 2)?;
        (crate::flatnorm::flat_norm(&t, &domain)?.value - 3.0 / 8.0).abs() < 1e-9
    });
    check("square boundary fills to area one", {
        let domain = crate::flatnorm::ComplexDomain::padded_cover(&b, 1)?;
        (crate::flatnorm::flat_norm(&b, &domain)?.value - 1.0).abs() < 1e-9
    });
    check("two-sided constant matches the closed form", {
        let c = crate::flatnorm::lp_constant(0.3, 1.0)?;
        let expect = 2f64.powf(0.7) / (2f64.powf(0.7) - 1.0) + 1.0 / (1.0 - 2f64.powf(-0.3));
        (c - expect).abs() < 1e-12
    });
    check("unit cube tilde cost is (2d)^(1-alpha)", {
        let dec = crate::grid::Decomposition::with_mass_bounds(
            vec![Chain::Cubical(crate::grid::CubicalChain::unit_cube(2))],
            0.5,
        )?;
        (crate::flatnorm::frac_cost_tilde(&dec)? - 4f64.powf(0.5)).abs() < 1e-12
    });
    check("indicator total variation is 2d", {
        let u = GridFunction::new(0, vec![0, 0], vec![1, 1], vec![1.0])?;
        (crate::sobolev::bv_norm(&u) - 4.0).abs() < 1e-12
    });
    check("young linear integral is one half", {
        let id = constant_like_identity();
        let r = crate::young::young_1d(&id, &id, 12)?;
        (r.value - 0.5).abs() <= (0.5f64).powi(12)
    });
    check("corner integral of coordinates is the volume", {
        let one = constant_fn(1.0, 2);
        let x1 = coordinate_fn(0);
        let x2 = coordinate_fn(1);
        let r = crate::young::zust_integral(&[one, x1, x2], 6)?;
        (r.value - 1.0).abs() < 1e-12
    });
    check("area form evaluates to one on the unit square", {
        let w = crate::young::SampledForm::monomial(2, &[0, 1], 1.0);
        (crate::young::form_eval(&w, &Chain::Cubical(sq.clone()))? - 1.0).abs() < 1e-12
    });
    check("area via the boundary pairing", {
        let comps = vec![
            crate::young::ScalarField::constant(0.0, 2),
            crate::young::ScalarField::from_fn_with_grad(|x: &[f64]| x[0], |_| vec![1.0, 0.0]),
        ];
        let w = crate::young::SampledForm::new(2, 1, 1.0, comps)?;
        let bchain = Chain::Cubical(b.clone());
        (crate::young::form_eval(&w, &bchain)? - 1.0).abs() < 1e-12
    });
    check("koch level zero is a triangle", crate::fractal::koch_polyline(0).len() == 3);
    check("disk measure approximates pi", {
        let m = crate::fractal::measure_center(&crate::fractal::disk([0.0, 0.0], 1.0), 8)?;
        (m - std::f64::consts::PI).abs() / std::f64::consts::PI < 0.01
    });
    check("mollifier has unit mass", {
        let m = crate::holder::Mollifier::shared();
        (m.mass_check(1) - 1.0).abs() < 1e-10 && (m.mass_check(2) - 1.0).abs() < 1e-10
    });
    check("identity degree field is the disk indicator", {
        let u = crate::fractal::disk([0.0, 0.0], 1.0);
        let id = parse_map("identity", 0)?;
        let f = crate::pushforward::degree_field(&id, &u, 5)?;
        f.deg.values.iter().all(|&v| v == v.round())
    });

    if failures > 0 {
        Err(Error::Numeric(format!("{failures} selftest checks failed")))
    } else {
        println!("all selftest checks passed");
        Ok(())
    }
}

fn constant_like_identity() -> HolderFunction {
    let form = crate::holder::SpectralForm { constant: 0.0, linear: vec![1.0], waves: vec![] };
    let f2 = form.clone();
    HolderFunction::new(
        1.0,
        1.0,
        vec![0.0],
        vec![1.0],
        1,
        true,
        "t",
        Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
    )
    .with_spectral(vec![form])
}

fn coordinate_fn(axis: usize) -> HolderFunction {
    let mut linear = vec![0.0, 0.0];
    linear[axis] = 1.0;
    let form = crate::holder::SpectralForm { constant: 0.0, linear, waves: vec![] };
    let f2 = form.clone();
    HolderFunction::new(
        1.0,
        1.0,
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        1,
        true,
        format!("x{}", axis + 1),
        Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
    )
    .with_spectral(vec![form])
}

fn cmd_corpus(out: &Path, global: &GlobalOpts) -> Result<()> {
    std::fs::create_dir_all(out)?;
    // the destination is implicit in the manifest's own location
    let mut em = Emitter::new("corpus", serde_json::json!({}), global);
    let mut count = 0usize;

    // chains
    let two_points = {
        let mut t = crate::grid::CubicalChain::zero(1, 0, 3);
        t.add_term(crate::grid::DyadicFace::new(vec![0], vec![]), 1.0);
        t.add_term(crate::grid::DyadicFace::new(vec![3], vec![]), -1.0);
        t
    };
    let chains: Vec<(&str, String)> = vec![
        ("two_points.json", crate::grid::cubical_to_json(&two_points)),
        (
            "unit_square.json",
            crate::grid::cubical_to_json(&crate::grid::CubicalChain::unit_cube(2)),
        ),
        (
            "square_boundary.json",
            crate::grid::cubical_to_json(&crate::grid::boundary(
                &crate::grid::CubicalChain::unit_cube(2),
            )?),
        ),
        (
            "cube3_boundary.json",
            crate::grid::cubical_to_json(&crate::grid::boundary(
                &crate::grid::CubicalChain::unit_cube(3),
            )?),
        ),
        ("unit_interval.json", {
            let mut t = crate::grid::SimplicialChain::zero(1, 1);
            t.push(vec![vec![0.0], vec![1.0]], 1.0);
            crate::grid::simplicial_to_json(&t)
        }),
        ("diagonal.json", {
            let mut t = crate::grid::SimplicialChain::zero(2, 1);
            t.push(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 1.0);
            crate::grid::simplicial_to_json(&t)
        }),
    ];
    for (name, text) in chains {
        em.write_output(&out.join("chains").join(name), &text)?;
        count += 1;
    }

    // koch boundary polylines at all levels
    for level in 0..=7u32 {
        let segs = crate::fractal::koch_polyline(level);
        let json = serde_json::to_string_pretty(&serde_json::json!({
            "name": format!("koch:{level}"),
            "segments": segs,
        }))?;
        em.write_output(&out.join("sets").join(format!("koch_{level}.json")), &json)?;
        count += 1;
    }

    // function samples on a level-10 grid
    let fns = [
        "weierstrass:a=0.6,terms=20",
        "weierstrass:a=0.7,terms=16",
        "weierstrass:a=0.8,terms=16",
        "takagi:terms=16",
        "fbm:h=0.7,seed=42",
    ];
    for spec in fns {
        let f = parse_function(spec, global.seed)?;
        let n = 1 << 10;
        let mut csv = String::new();
        for i in 0..=n {
            let t = i as f64 / n as f64;
            csv.push_str(&format!("{}\n", f.eval1(t)));
        }
        let safe = spec.replace([':', ',', '='], "_");
        em.write_output(&out.join("functions").join(format!("{safe}.csv")), &csv)?;
        count += 1;
    }

    // grid functions
    let gf_dir = out.join("gridfns");
    std::fs::create_dir_all(&gf_dir)?;
    let interval = GridFunction::new(10, vec![0], vec![1024], vec![1.0; 1024])?;
    crate::sobolev::write_grid_function(&interval, &gf_dir.join("indicator_interval.json"))?;
    count += 2;
    let bump = GridFunction::from_fn(6, vec![0], vec![64], |x| {
        let t = x[0];
        if t > 0.1 && t < 0.9 {
            (-1.0 / ((t - 0.1) * (0.9 - t))).exp()
        } else {
            0.0
        }
    });
    crate::sobolev::write_grid_function(&bump, &gf_dir.join("bump.json"))?;
    count += 2;
    let checker = GridFunction::from_fn(5, vec![0, 0], vec![32, 32], |x| {
        let i = (x[0] * 8.0).floor() as i64 + (x[1] * 8.0).floor() as i64;
        if i % 2 == 0 {
            1.0
        } else {
            0.0
        }
    });
    crate::sobolev::write_grid_function(&checker, &gf_dir.join("checker.json"))?;
    count += 2;

    // form specs for the wedge pipeline
    let forms = [
        (
            "omega_rough.json",
            serde_json::json!({
                "d": 2, "m": 0, "alpha": 1.0,
                "comps": ["const:1"],
            }),
        ),
        (
            "eta_gradient.json",
            serde_json::json!({
                "d": 2, "m": 2, "alpha": 0.8,
                "comps": [],
                "potentials": ["weierstrass:a=0.8,terms=10|axis=1|linear=1,0", "const:0|axis=0|linear=0,1"],
            }),
        ),
    ];
    for (name, v) in forms {
        em.write_output(&out.join("forms").join(name), &serde_json::to_string_pretty(&v)?)?;
        count += 1;
    }

    println!("materialized {count} corpus objects under {}", out.display());
    let index = out.join("index.json");
    let listing: Vec<String> = em.outputs.keys().cloned().collect();
    em.write_output(&index, &serde_json::to_string_pretty(&listing)?)?;
    em.finish(Some(&index), serde_json::json!({"objects": count}))?;
    Ok(())
}
