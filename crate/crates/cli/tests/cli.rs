//! End-to-end checks of the command-line surface via the built binary.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tlc"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("tlc-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn compress_decompress_round_trip() {
    let input = tmp("input");
    let code = tmp("code");
    let d_file = tmp("D.txt");
    let out = tmp("out");
    let payload: &[u8] = b"round trip payload";
    fs::write(&input, payload).unwrap();

    // a decompressor whose one-bit program produces the payload
    let bits: String = payload.iter().map(|b| format!("{b:08b}")).collect();
    let hex: String = (0..bits.len() / 4)
        .map(|i| {
            char::from_digit(u32::from_str_radix(&bits[4 * i..4 * i + 4], 2).unwrap(), 16).unwrap()
        })
        .collect();
    fs::write(&d_file, format!("P 1:0 -> {}:{hex}\nP 3:2 -> 8:a5\n", bits.len())).unwrap();

    let m = 300u64;
    let status = bin()
        .args(["compress", "--input"])
        .arg(&input)
        .args(["--target-m", &m.to_string(), "--eps-exp", "3", "--seed", "11", "--out"])
        .arg(&code)
        .status()
        .unwrap();
    assert!(status.success());
    // code file byte length: header line plus ceil(m/8) packed bytes
    let header = format!("TLC1 {m}\n");
    assert_eq!(fs::metadata(&code).unwrap().len(), header.len() as u64 + m.div_ceil(8));

    let output = bin()
        .args(["decompress", "--code"])
        .arg(&code)
        .args(["--decompressor"])
        .arg(&d_file)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(fs::read(&out).unwrap(), payload);
    for p in [input, code, d_file, out] {
        let _ = fs::remove_file(p);
    }
}

#[test]
fn target_below_minimum_exits_2() {
    let input = tmp("tiny-input");
    fs::write(&input, b"0123456789").unwrap();
    let status = bin()
        .args(["compress", "--input"])
        .arg(&input)
        .args(["--target-m", "8", "--eps-exp", "2", "--seed", "0", "--out"])
        .arg(tmp("never-written"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let _ = fs::remove_file(input);
}

#[test]
fn simulate_reports_are_deterministic() {
    let r1 = tmp("rep1");
    let r2 = tmp("rep2");
    for r in [&r1, &r2] {
        let status = bin()
            .args([
                "simulate-sw",
                "--scenario",
                "line-point",
                "--w",
                "4",
                "--eps-exp",
                "3",
                "--trials",
                "24",
                "--seed",
                "9",
                "--out",
            ])
            .arg(r)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(&r1).unwrap();
    assert_eq!(a, fs::read(&r2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# scenario"));
    assert!(text.contains("# instance_hash"));
    let _ = fs::remove_file(r1);
    let _ = fs::remove_file(r2);
}

#[test]
fn single_sender_scenario_runs() {
    let out = tmp("ell1");
    let status = bin()
        .args([
            "simulate-sw", "--scenario", "random", "--ell", "1", "--eps-exp", "3", "--trials",
            "40", "--seed", "4", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    // every reported row satisfies its floor column
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("tuple")) {
        assert!(line.ends_with("true"), "row failed its floor: {line}");
    }
    let _ = fs::remove_file(out);
}

#[test]
fn conductor_search_and_verify_round_trip() {
    let table = tmp("cnd");
    let status = bin()
        .args(["search-conductor", "--n", "3", "--k", "2", "--eps-exp", "1", "--seed", "1", "--out"])
        .arg(&table)
        .status()
        .unwrap();
    assert!(status.success());
    let output = bin()
        .args(["verify-condenser", "--table"])
        .arg(&table)
        .args(["--k", "4", "--eps-exp", "1", "--mode", "exhaustive"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("verified\ttrue"), "{text}");
    let _ = fs::remove_file(table);
}
