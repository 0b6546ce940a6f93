//! The command-line workflow driven in-process: simulate, fuse, score and
//! replay, all through files in a scratch directory.
//!
//! ```text
//! cargo run --release --example file_pipeline -- [work_dir]
//! ```

use std::path::PathBuf;

use qis_hdr::cli::{manifest_path, run};
use qis_hdr::{io, RadianceMap};

fn qis(args: &[&str]) -> String {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("qis-hdr").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    String::from_utf8(out).unwrap()
}

fn main() -> qis_hdr::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qis-hdr-pipeline"));
    std::fs::create_dir_all(&dir).expect("work directory");
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();

    io::write_pfm(p("scene.pfm"), &RadianceMap::log_ramp(128, 16, 1e2, 1e5)?)?;
    print!(
        "{}",
        qis(&[
            "simulate",
            "--scene",
            &p("scene.pfm"),
            "--out",
            &p("scene.qstk"),
            "--exposures",
            "10ms:100,1ms:100,100us:100",
            "--bits",
            "3",
            "--seed",
            "3",
        ])
    );
    for method in ["proposed", "cis", "equal"] {
        let est = p(&format!("{method}.pfm"));
        let summary = qis(&["fuse", "--stack", &p("scene.qstk"), "--out", &est, "--method", method]);
        let score = qis(&["eval", "--estimate", &est, "--truth", &p("scene.pfm")]);
        println!("{method:>9}: log-MSE {}   {}", score.trim(), summary.replace('\n', " "));
    }

    // regenerate the proposed estimate from its manifest
    let before = std::fs::read(p("proposed.pfm")).unwrap();
    qis(&["replay", &manifest_path(&dir.join("proposed.pfm")).to_string_lossy()]);
    assert_eq!(before, std::fs::read(p("proposed.pfm")).unwrap());
    println!(
        "replay reproduced proposed.pfm byte for byte; files in {}",
        dir.display()
    );
    Ok(())
}
