//! End-to-end runs of the binary: exit codes, reproducibility across worker
//! counts, and corpus idempotence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraccur"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fraccur_cli_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

/// Run one pipeline twice with different worker counts; all produced files
/// must be byte-identical.
fn assert_thread_invariant(name: &str, args: &[&str], fixtures: &Path) {
    let mut dirs = Vec::new();
    for threads in ["1", "4"] {
        let out = tmp(&format!("{name}_t{threads}"));
        let mut cmd = bin();
        cmd.args(args)
            .arg("--threads")
            .arg(threads)
            .current_dir(fixtures);
        // route --out into this run's directory
        let status = cmd
            .args(["--out".as_ref(), out.join("result.out").as_os_str()])
            .status()
            .unwrap();
        assert!(status.success(), "{name} with {threads} threads failed");
        dirs.push(out);
    }
    let mut files_a = Vec::new();
    collect_files(&dirs[0], &mut files_a);
    assert!(!files_a.is_empty(), "{name} produced no outputs");
    for fa in files_a {
        let rel = fa.strip_prefix(&dirs[0]).unwrap();
        let fb = dirs[1].join(rel);
        let a = std::fs::read(&fa).unwrap();
        let b = std::fs::read(&fb).unwrap_or_default();
        assert_eq!(a, b, "{name}: output {} differs across thread counts", rel.display());
    }
    for d in dirs {
        let _ = std::fs::remove_dir_all(d);
    }
}

fn fixtures() -> PathBuf {
    let dir = tmp("fixtures");
    let status = bin().args(["corpus", "--out"]).arg(&dir).status().unwrap();
    assert!(status.success(), "corpus generation failed");
    dir
}

#[test]
fn criterion_9_determinism_across_threads() {
    let fx = fixtures();
    let chains = fx.join("chains");
    let gridfns = fx.join("gridfns");
    let forms = fx.join("forms");

    let two_points = chains.join("two_points.json");
    let diagonal = chains.join("diagonal.json");
    let unit_interval = chains.join("unit_interval.json");
    let unit_square = chains.join("unit_square.json");
    let indicator = gridfns.join("indicator_interval.json");

    assert_thread_invariant(
        "flatnorm",
        &["flatnorm", "--chain", two_points.to_str().unwrap(), "--pad", "2"],
        &fx,
    );
    assert_thread_invariant(
        "deform",
        &["deform", "--chain", diagonal.to_str().unwrap(), "--eps", "1/4"],
        &fx,
    );
    assert_thread_invariant(
        "gagliardo",
        &["gagliardo", "--fn", indicator.to_str().unwrap(), "--alpha", "0.5"],
        &fx,
    );
    assert_thread_invariant(
        "perimeter",
        &["perimeter", "--set", indicator.to_str().unwrap(), "--alpha", "0.5"],
        &fx,
    );
    assert_thread_invariant(
        "decompose",
        &["decompose", "--fn", indicator.to_str().unwrap(), "--depth", "6", "--alpha", "0.5"],
        &fx,
    );
    assert_thread_invariant(
        "boxdim",
        &["boxdim", "--set", "koch:5", "--levels", "2..6"],
        &fx,
    );
    assert_thread_invariant(
        "whitney",
        &["whitney", "--set", "disk", "--kmax", "5", "--alpha", "0.5"],
        &fx,
    );
    assert_thread_invariant(
        "push",
        &[
            "push",
            "--chain",
            unit_interval.to_str().unwrap(),
            "--map",
            "graphw:a=0.8,terms=10",
            "--gamma",
            "0.8",
            "--nmax",
            "4",
        ],
        &fx,
    );
    assert_thread_invariant(
        "degree",
        &["degree", "--set", "disk", "--map", "zsquare", "--grid", "64", "--beta", "0.25"],
        &fx,
    );
    assert_thread_invariant(
        "young",
        &[
            "young",
            "--g0",
            "weierstrass:a=0.7",
            "--g1",
            "weierstrass:a=0.7,phase=1",
            "--levels",
            "10",
        ],
        &fx,
    );
    assert_thread_invariant(
        "zust",
        &[
            "zust",
            "--d",
            "2",
            "--g0",
            "const:1",
            "--g1",
            "weierstrass:a=0.8,terms=8|axis=1|linear=1,0",
            "--g2",
            "const:0|linear=0,1",
            "--levels",
            "8",
            "--report",
            "csv",
        ],
        &fx,
    );
    assert_thread_invariant(
        "wedge",
        &[
            "wedge",
            "--omega",
            forms.join("omega_rough.json").to_str().unwrap(),
            "--eta",
            forms.join("eta_gradient.json").to_str().unwrap(),
            "--chain",
            unit_square.to_str().unwrap(),
            "--nmax",
            "4",
        ],
        &fx,
    );
    println!("criterion 9 (byte-identical outputs across --threads 1/4 on 12 pipelines): PASS");
    let _ = std::fs::remove_dir_all(fx);
}

#[test]
fn corpus_regeneration_is_idempotent() {
    let a = tmp("corpus_a");
    let b = tmp("corpus_b");
    for d in [&a, &b] {
        let status = bin().args(["corpus", "--out"]).arg(d).status().unwrap();
        assert!(status.success());
    }
    let mut files = Vec::new();
    collect_files(&a, &mut files);
    assert!(files.len() >= 20, "corpus too small: {} files", files.len());
    for fa in files {
        let rel = fa.strip_prefix(&a).unwrap();
        let fb = b.join(rel);
        assert_eq!(
            std::fs::read(&fa).unwrap(),
            std::fs::read(&fb).unwrap_or_default(),
            "corpus file {} differs between regenerations",
            rel.display()
        );
    }
    let _ = std::fs::remove_dir_all(a);
    let _ = std::fs::remove_dir_all(b);
}

#[test]
fn exit_codes_by_error_class() {
    // unknown function spec: configuration error
    let st = bin()
        .args(["young", "--g0", "nosuch:1", "--g1", "weierstrass:a=0.7", "--levels", "4"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2), "config errors exit 2");

    // exponent relation violated: precondition error
    let fx = fixtures();
    let st = bin()
        .args([
            "push",
            "--chain",
            fx.join("chains").join("unit_interval.json").to_str().unwrap(),
            "--map",
            "graphw:a=0.45,terms=8",
            "--gamma",
            "0.45",
            "--nmax",
            "3",
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3), "precondition errors exit 3");

    // seminorm exponent out of range: precondition error
    let st = bin()
        .args([
            "gagliardo",
            "--fn",
            fx.join("gridfns").join("indicator_interval.json").to_str().unwrap(),
            "--alpha",
            "1.5",
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));

    // selftest succeeds
    let st = bin().arg("selftest").status().unwrap();
    assert_eq!(st.code(), Some(0));
    let _ = std::fs::remove_dir_all(fx);
}
