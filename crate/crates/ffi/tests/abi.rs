//! The C ABI agrees with the core library and reports errors by code.

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use xrecap::corpus::EmbeddingStore;
use xrecap::refsel::NnIndex;
use xrecap::trainer::{save_checkpoint, Checkpoint, ProjectionHead};
use xrecap_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn sample_store(dir: &Path) -> (EmbeddingStore, std::path::PathBuf) {
    let mut s = EmbeddingStore::new(3).unwrap();
    for (i, v) in [[1.0, 0.0, 0.0], [0.8, 0.6, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.0, 0.8]]
        .iter()
        .enumerate()
    {
        s.insert(format!("img{i}"), v).unwrap();
    }
    let path = dir.join("s.emb");
    s.write(&path).unwrap();
    (s, path)
}

fn last_error() -> String {
    let p = xrecap_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn store_round_trip_and_query_match_core() {
    let dir = tempfile::tempdir().unwrap();
    let (core, path) = sample_store(dir.path());
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(xrecap_store_open(cstr(&path).as_ptr(), &mut h), XrecapStatus::Ok);
        assert_eq!(xrecap_store_len(h), 5);
        assert_eq!(xrecap_store_dim(h), 3);
        assert_eq!(CStr::from_ptr(xrecap_store_id(h, 1)).to_str().unwrap(), "img1");
        assert!(xrecap_store_id(h, 5).is_null());

        let mut v = [0.0; 3];
        let id = CString::new("img4").unwrap();
        assert_eq!(xrecap_store_get(h, id.as_ptr(), v.as_mut_ptr(), 3), XrecapStatus::Ok);
        assert_eq!(v.to_vec(), core.get_f64("img4").unwrap());

        let q = [0.9, 0.1, 0.3];
        let (mut idx, mut sim, mut n) = ([0usize; 3], [0.0; 3], 0usize);
        let st = xrecap_store_query(h, q.as_ptr(), 3, 3, idx.as_mut_ptr(), sim.as_mut_ptr(), &mut n);
        assert_eq!(st, XrecapStatus::Ok);
        let expected = NnIndex::build(&core, core.ids()).unwrap().query(&q, 3).unwrap();
        assert_eq!(n, 3);
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(core.ids()[idx[i]], e.image_id);
            assert_eq!(sim[i], e.similarity);
        }
        xrecap_store_free(h);
    }
}

#[test]
fn head_checkpoint_projection_matches_core() {
    let dir = tempfile::tempdir().unwrap();
    let head = ProjectionHead::init(4, 3, 9);
    let path = dir.path().join("h.xrc");
    save_checkpoint(
        &Checkpoint {
            head: head.clone(),
            seed: 9,
            config_hash: [0; 32],
        },
        &path,
    )
    .unwrap();
    let x = [0.5, -0.2, 0.1, 0.8];
    let mut out = [0.0; 3];
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(xrecap_head_load(cstr(&path).as_ptr(), &mut h), XrecapStatus::Ok);
        assert_eq!((xrecap_head_d_text(h), xrecap_head_d_joint(h)), (4, 3));
        assert_eq!(xrecap_head_project(h, x.as_ptr(), 4, out.as_mut_ptr(), 3), XrecapStatus::Ok);
        assert_eq!(out.to_vec(), head.project(&x).unwrap());
        assert_eq!(
            xrecap_head_project(h, x.as_ptr(), 4, out.as_mut_ptr(), 2),
            XrecapStatus::BufferTooSmall
        );
        assert_eq!(xrecap_head_project(h, x.as_ptr(), 3, out.as_mut_ptr(), 3), XrecapStatus::DimMismatch);
        xrecap_head_free(h);

        let mut g = ptr::null_mut();
        assert_eq!(xrecap_head_init(4, 3, 9, &mut g), XrecapStatus::Ok);
        let mut out2 = [0.0; 3];
        xrecap_head_project(g, x.as_ptr(), 4, out2.as_mut_ptr(), 3);
        assert_eq!(out, out2);
        xrecap_head_free(g);
    }
}

#[test]
fn loss_and_rouge() {
    let n = 8;
    let text: Vec<f64> = (0..n).flat_map(|_| [1.0, 0.0]).collect();
    let mut loss = 0.0;
    unsafe {
        assert_eq!(
            xrecap_contrastive_loss(text.as_ptr(), text.as_ptr(), n, 2, 0.07, &mut loss),
            XrecapStatus::Ok
        );
    }
    assert!((loss - (n as f64).ln()).abs() < 1e-9);

    let (c, r) = (CString::new("the cat sat").unwrap(), CString::new("the cat ran").unwrap());
    let mut f = 0.0;
    for v in ["r1", "rL"] {
        let v = CString::new(v).unwrap();
        unsafe {
            assert_eq!(xrecap_rouge(c.as_ptr(), r.as_ptr(), v.as_ptr(), &mut f), XrecapStatus::Ok);
        }
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }
    let bad = CString::new("r9").unwrap();
    unsafe {
        assert_eq!(xrecap_rouge(c.as_ptr(), r.as_ptr(), bad.as_ptr(), &mut f), XrecapStatus::InvalidArgument);
    }
    assert!(last_error().contains("r9"));
}

#[test]
fn errors_set_codes_and_messages() {
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(xrecap_store_open(ptr::null(), &mut h), XrecapStatus::NullPointer);
        assert!(last_error().contains("path"));
        let missing = CString::new("/nonexistent/x.emb").unwrap();
        assert_eq!(xrecap_store_open(missing.as_ptr(), &mut h), XrecapStatus::Io);
        assert!(last_error().contains("/nonexistent/x.emb"));
        assert!(h.is_null());
        assert_eq!(xrecap_store_len(ptr::null()), 0);
        xrecap_store_free(ptr::null_mut());

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.xrc");
        std::fs::write(&junk, b"not a checkpoint").unwrap();
        let mut head = ptr::null_mut();
        assert_eq!(xrecap_head_load(cstr(&junk).as_ptr(), &mut head), XrecapStatus::Format);

        let one = [1.0, 0.0];
        let mut loss = 0.0;
        assert_eq!(
            xrecap_contrastive_loss(one.as_ptr(), one.as_ptr(), 1, 2, 0.07, &mut loss),
            XrecapStatus::InvalidArgument
        );
    }
    let v = unsafe { CStr::from_ptr(xrecap_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn pipeline_config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "out_dir = \"run\"\n[split]\nref_fraction = 0.9\ntrain_fraction = 0.9\n").unwrap();
    unsafe {
        assert_eq!(xrecap_pipeline_all(cstr(&cfg).as_ptr()), XrecapStatus::Config);
    }
    let msg = last_error();
    assert!(msg.contains("paths.images") && msg.contains("split fractions"), "{msg}");
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "xrecap.h"

int main(void) {
    double text[4] = {1.0, 0.0, 1.0, 0.0};
    double loss = 0.0;
    if (xrecap_contrastive_loss(text, text, 2, 2, 0.07, &loss) != XRECAP_STATUS_OK) return 1;
    if (fabs(loss - log(2.0)) > 1e-9) return 2;
    XrecapStore *s = NULL;
    if (xrecap_store_open(NULL, &s) != XRECAP_STATUS_NULL_POINTER) return 3;
    if (xrecap_last_error() == NULL) return 4;
    XrecapHead *h = NULL;
    if (xrecap_head_init(2, 2, 1, &h) != XRECAP_STATUS_OK) return 5;
    double out[2];
    if (xrecap_head_project(h, text, 2, out, 2) != XRECAP_STATUS_OK) return 6;
    xrecap_head_free(h);
    printf("%s\n", xrecap_version());
    return 0;
}
"#;

/// The generated header compiles as C and, when the shared library is
/// present next to the test binary, links and runs.
#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include/xrecap.h");
    assert!(header.exists(), "header not generated");
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; header check skipped");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = crate_dir.join("include");
    let ok = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(ok.success(), "header does not compile as C");

    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let libdir = deps.parent().unwrap();
    if !libdir.join("libxrecap_ffi.so").exists() {
        eprintln!("shared library not found in {}; link check skipped", libdir.display());
        return;
    }
    let exe = dir.path().join("main");
    let built = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg(format!("-L{}", libdir.display()))
        .arg(format!("-Wl,-rpath,{}", libdir.display()))
        .args(["-lxrecap_ffi", "-lm"])
        .status()
        .unwrap();
    assert!(built.success(), "linking against the shared library failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program failed with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
