//! Workspace-level acceptance criterion: determinism of CLI artifacts
//! under a fixed seed across thread counts, plus the drift-check exit-code
//! contract.

use std::path::Path;
use std::process::Command;

fn run_cli(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stabledrift"))
        .args(args)
        .arg("--out")
        .arg(out)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("spawn CLI")
}

fn scenario_path() -> String {
    format!(
        "{}/../../scenarios/reference.toml",
        env!("CARGO_MANIFEST_DIR")
    )
}

#[test]
fn criterion_13_determinism_across_thread_counts() {
    let tmp = std::env::temp_dir().join(format!("stabledrift-det-{}", std::process::id()));
    let sc = scenario_path();
    let mut digests = Vec::new();
    for (tag, threads) in [("a", "1"), ("b", "4"), ("c", "1")] {
        let out = tmp.join(tag);
        std::fs::create_dir_all(&out).unwrap();
        for cmd in ["constants", "drift-check", "generator-check"] {
            let o = run_cli(
                &[cmd, "--scenario", &sc, "--seed", "424242", "--threads", threads],
                &out,
            );
            assert!(
                o.status.success(),
                "{cmd} failed: {}",
                String::from_utf8_lossy(&o.stderr)
            );
        }
        let mut files: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "run_manifest.json")
            .collect();
        files.sort();
        let blob: Vec<u8> = files
            .iter()
            .flat_map(|p| std::fs::read(p).unwrap())
            .collect();
        digests.push((tag, blob));
    }
    assert_eq!(digests[0].1, digests[1].1, "threads=1 vs threads=4 differ");
    assert_eq!(digests[0].1, digests[2].1, "repeat run differs");
    println!(
        "criterion 13 determinism: PASS ({} artifact bytes bit-identical across runs)",
        digests[0].1.len()
    );
    std::fs::remove_dir_all(&tmp).ok();
}

#[test]
fn drift_check_exit_codes() {
    let tmp = std::env::temp_dir().join(format!("stabledrift-exit-{}", std::process::id()));
    std::fs::create_dir_all(&tmp).unwrap();
    // inadmissible exponents: exit 1, message cites the condition
    let text = std::fs::read_to_string(scenario_path()).unwrap();
    let broken = text
        .replace("p = 12.0", "p = 4.0")
        .replace("q = 12.0", "q = 4.0");
    let bad = tmp.join("bad.toml");
    std::fs::write(&bad, broken).unwrap();
    let o = run_cli(
        &["drift-check", "--scenario", bad.to_str().unwrap()],
        &tmp,
    );
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(
        msg.contains("alpha - 1"),
        "must cite the admissibility condition, got: {msg}"
    );
    // unreadable scenario: exit 3
    let o = run_cli(&["drift-check", "--scenario", "/nonexistent/x.toml"], &tmp);
    assert_eq!(o.status.code(), Some(3));
    println!("exit-code contract: PASS");
    std::fs::remove_dir_all(&tmp).ok();
}
