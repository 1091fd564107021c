use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;
use std::sync::OnceLock;

use recourse_core::model::{train, NetConfig, TrainConfig};
use recourse_core::pipeline::{fit_gold, ToySpec};
use recourse_core::predictors::{train_mlp, ForestConfig, MlpConfig};
use recourse_ffi::*;
use serde_json::Value;

/// Run directory with a briefly trained moons model, shared by all tests.
fn run_dir() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = ToySpec {
            n: 400,
            ..ToySpec::moons()
        }
        .bundle(3)
        .unwrap();
        let gold = fit_gold(&mut bundle, &ForestConfig::default(), 3).unwrap();
        let h = train_mlp(
            &bundle.train,
            None,
            &MlpConfig {
                restarts: 1,
                ..MlpConfig::default()
            },
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            n_bins: 20,
            net: NetConfig {
                embed: 8,
                heads: 2,
                ffn: 8,
                enc_layers: 1,
                dec_layers: 1,
            },
            ..TrainConfig::toy()
        };
        let (model, _) = train(&bundle.train, &h, &cfg).unwrap();
        bundle.save(&dir.path().join("labeled.json")).unwrap();
        gold.save(&dir.path().join("gold.json")).unwrap();
        h.save(&dir.path().join("classifier.json")).unwrap();
        model.save(&dir.path().join("model.json")).unwrap();
        dir
    })
    .path()
}

struct Handle(*mut RcSnapshot);

unsafe impl Send for Handle {}
unsafe impl Sync for Handle {}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { rc_snapshot_free(self.0) };
    }
}

fn load(dir: &Path) -> Result<Handle, (i32, String)> {
    let c = CString::new(dir.to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    let code = unsafe { rc_snapshot_load_dir(c.as_ptr(), &mut out) };
    if code == RC_OK {
        assert!(!out.is_null());
        Ok(Handle(out))
    } else {
        assert!(out.is_null());
        Err((code, last_error().unwrap()))
    }
}

fn last_error() -> Option<String> {
    let p = rc_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string())
}

fn take(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { rc_string_free(p) };
    s
}

fn request(snap: &Handle, body: &str) -> Result<Value, (i32, String)> {
    let c = CString::new(body).unwrap();
    let mut out = ptr::null_mut();
    match unsafe { rc_recourse_json(snap.0, c.as_ptr(), &mut out) } {
        RC_OK => Ok(serde_json::from_str(&take(out)).unwrap()),
        code => {
            assert!(out.is_null());
            Err((code, last_error().unwrap()))
        }
    }
}

const QUERY: &str = r#"{"instance": {"x1": -0.5, "x2": 0.8}, "n_samples": 6, "seed": 11}"#;

#[test]
fn samples_sorted_candidates_deterministically() {
    let snap = load(run_dir()).unwrap();
    assert!(last_error().is_none());

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rc_schema_json(snap.0, &mut out) }, RC_OK);
    let schema: Value = serde_json::from_str(&take(out)).unwrap();
    let names: Vec<&str> = schema["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["x1", "x2"]);

    let a = request(&snap, QUERY).unwrap();
    let b = request(&snap, QUERY).unwrap();
    assert_eq!(a, b);
    let cands = a["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 6);
    let h: Vec<f64> = cands.iter().map(|c| c["h_score"].as_f64().unwrap()).collect();
    assert!(h.windows(2).all(|w| w[0] >= w[1]), "{h:?}");
    assert_eq!(a["seed"], 11);
}

#[test]
fn snapshot_is_shareable_across_threads() {
    let snap = load(run_dir()).unwrap();
    let expected = request(&snap, QUERY).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| request(&snap, QUERY).unwrap())).collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    });
}

#[test]
fn failures_map_to_codes_and_messages() {
    let snap = load(run_dir()).unwrap();
    let cases = [
        ("not json", "invalid request"),
        (r#"{"instance": {"x1": 0.1}}"#, "missing feature `x2`"),
        (
            r#"{"instance": {"x1": 0.1, "x2": 0.2, "x3": 0}}"#,
            "unknown feature `x3`",
        ),
        (r#"{"instance": {"x1": 0.1, "x2": 0.2}, "n_samples": 0}"#, "n_samples"),
        (r#"{"instance": {"x1": 0.1, "x2": 0.2}, "bogus": 1}"#, "invalid request"),
    ];
    for (body, needle) in cases {
        let (code, msg) = request(&snap, body).unwrap_err();
        assert_eq!(code, RC_BAD_REQUEST, "{body}");
        assert!(msg.contains(needle), "{body}: {msg}");
    }
    // a success clears the message
    request(&snap, QUERY).unwrap();
    assert!(last_error().is_none());

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rc_recourse_json(ptr::null(), c"{}".as_ptr(), &mut out) },
        RC_NULL_ARGUMENT
    );
    assert_eq!(
        unsafe { rc_recourse_json(snap.0, ptr::null(), &mut out) },
        RC_NULL_ARGUMENT
    );
    assert_eq!(
        unsafe { rc_recourse_json(snap.0, c"{}".as_ptr(), ptr::null_mut()) },
        RC_NULL_ARGUMENT
    );
    assert_eq!(
        unsafe { rc_snapshot_load_dir(ptr::null(), &mut ptr::null_mut()) },
        RC_NULL_ARGUMENT
    );
    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { rc_snapshot_load_dir(bad_utf8.as_ptr().cast(), &mut ptr::null_mut()) },
        RC_INVALID_UTF8
    );
    unsafe {
        rc_string_free(ptr::null_mut());
        rc_snapshot_free(ptr::null_mut());
    }
}

#[test]
fn load_failures_distinguish_missing_from_corrupt() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, msg) = load(&tmp.path().join("nowhere")).map(|_| ()).unwrap_err();
    assert_eq!(code, RC_IO, "{msg}");

    for f in ["labeled.json", "gold.json", "classifier.json", "model.json"] {
        std::fs::copy(run_dir().join(f), tmp.path().join(f)).unwrap();
    }
    load(tmp.path()).unwrap();
    std::fs::write(tmp.path().join("model.json"), b"{\"truncated\": ").unwrap();
    let (code, _) = load(tmp.path()).map(|_| ()).unwrap_err();
    assert_eq!(code, RC_INVALID_ARTIFACT);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(rc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/recourse.h")
}

#[test]
fn header_declares_the_exported_surface() {
    let text = std::fs::read_to_string(header()).unwrap();
    for symbol in [
        "typedef struct RcSnapshot RcSnapshot",
        "rc_version(void)",
        "rc_last_error(void)",
        "rc_snapshot_load_dir(",
        "rc_snapshot_free(",
        "rc_schema_json(",
        "rc_recourse_json(",
        "rc_string_free(",
        "#define RC_OK 0",
        "#define RC_PANIC 8",
    ] {
        assert!(text.contains(symbol), "header lacks `{symbol}`");
    }
}

/// Static library built alongside this test binary (in `deps/`).
fn static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().join("librecourse_ffi.a")
}

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler on PATH; skipped");
        return;
    }
    let lib = static_lib();
    assert!(lib.is_file(), "missing {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "recourse.h"

int main(int argc, char **argv) {
    RcSnapshot *snap = NULL;
    if (rc_snapshot_load_dir(argv[1], &snap) != RC_OK) {
        fprintf(stderr, "%s\n", rc_last_error());
        return 2;
    }
    char *out = NULL;
    int code = rc_recourse_json(snap, "{\"instance\": {\"x1\": -0.5, \"x2\": 0.8}, \"n_samples\": 3, \"seed\": 1}", &out);
    if (code != RC_OK) {
        fprintf(stderr, "%s\n", rc_last_error());
        rc_snapshot_free(snap);
        return 3;
    }
    puts(out);
    rc_string_free(out);
    code = rc_recourse_json(snap, "{}", &out);
    printf("%d %s\n", code, rc_last_error());
    rc_snapshot_free(snap);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("demo");
    let build = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).arg(run_dir()).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let mut lines = stdout.lines();
    let resp: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(resp["candidates"].as_array().unwrap().len(), 3);
    assert!(lines.next().unwrap().starts_with(&format!("{RC_BAD_REQUEST} ")));
}
