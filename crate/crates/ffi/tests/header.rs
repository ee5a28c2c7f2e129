//! The generated header compiles, and a C program linked against the static
//! library reproduces the case-study clearing.

use std::path::{Path, PathBuf};
use std::process::Command;

const HEADER: &str = include_str!("../include/reserve_exchange.h");

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_declares_every_export() {
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 14, "{exports:?}");
    for f in exports {
        assert!(HEADER.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(HEADER.contains("typedef struct RxScenario RxScenario;"));
}

#[test]
fn header_is_valid_c() {
    assert!(have_cc(), "a C compiler is required for this test");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(include_dir().join("reserve_exchange.h"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libreserve_exchange_ffi.a");
    lib.exists().then_some(lib)
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "reserve_exchange.h"

int main(void) {
    RxScenario *s = NULL;
    if (rx_scenario_casestudy(&s) != RX_STATUS_OK) return 10;
    double x[3], v, p[3], u[3], eps;
    if (rx_clear_market(s, x, 3, &v) != RX_STATUS_OK) return 11;
    if (rx_payments(s, RX_MECHANISM_MLC, p, u, 3) != RX_STATUS_OK) return 12;
    if (rx_least_core(s, &eps) != RX_STATUS_OK) return 13;
    if (rx_clear_market(s, x, 1, &v) != RX_STATUS_BUFFER_TOO_SMALL) return 14;
    if (strlen(rx_last_error()) == 0) return 15;
    char *report = NULL;
    if (rx_run("certify-groves", NULL, NULL, &report) != RX_STATUS_OK) return 16;
    int ok = strstr(report, "\"augmented_rank\": 4") != NULL;
    rx_string_free(report);
    rx_scenario_free(s);
    printf("%.1f %.1f %.1f %.5f %.5f %.5f %.5f %d\n", x[0], x[1], x[2], v, p[0], u[0], eps, ok);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    assert!(have_cc(), "a C compiler is required for this test");
    let lib = static_lib().expect("static library is built alongside the tests");
    let dir = std::env::temp_dir().join(format!("rx-capi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(include_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(
        String::from_utf8_lossy(&run.stdout).trim(),
        "0.4 0.0 0.2 1.10136 -0.27816 0.46784 0.12440 1"
    );
    let _ = std::fs::remove_dir_all(&dir);
}
