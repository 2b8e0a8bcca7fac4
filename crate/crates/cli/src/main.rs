//! `tlc`: compress to exact target lengths, decode against toy
//! decompressors, and run the verification experiments.
//!
//! Every command takes `--seed` and is fully deterministic given it.
//! Reports are TSV with a `#`-prefixed config block that embeds the
//! arguments and a content hash of the input files.  Commands exit
//! nonzero only on usage or format errors, never on statistical
//! outcomes; a target too small for any code exits with status 2.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use tlc_core::analysis::{degree_lb_check, overhead_lb_check, randomness_lb_check, BoundReport};
use tlc_core::bits::{BitString, Code};
use tlc_core::compressor::{compress, decompress_online, parse_code, ToyDecompressor};
use tlc_core::condensers::{search_conductor, verify_conductor, CondenserTable, VerifyMode};
use tlc_core::distributed::{
    decode_multi, line_point_toy, random_tuple_toy, small_slices_check, CoordinateFingerprint,
    DecodeMode, SwInstance,
};
use tlc_core::error::Error;
use tlc_core::rng::{mix, EpsilonExp, Seed};

#[derive(Parser)]
#[command(name = "tlc", version, about = "lossless compression with target lengths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Prob,
    Majority,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    LinePoint,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a file to exactly the target number of bits.
    Compress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target_m: u64,
        #[arg(long)]
        eps_exp: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a code file against a toy decompressor table.
    Decompress {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        decompressor: PathBuf,
        /// Optional condition bitstring, as a len:hex token.
        #[arg(long)]
        condition: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo multi-sender decoding over a generated scenario.
    SimulateSw {
        #[arg(long, value_enum, default_value_t = ScenarioArg::LinePoint)]
        scenario: ScenarioArg,
        /// Field degree for the line-point scenario.
        #[arg(long, default_value_t = 8)]
        w: u32,
        /// Sender count for the random scenario.
        #[arg(long, default_value_t = 3)]
        ell: usize,
        #[arg(long, default_value_t = 3)]
        eps_exp: u32,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Prob)]
        mode: ModeArg,
        /// Majority-mode tree count.
        #[arg(long, default_value_t = 15)]
        majority_trials: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a condenser table's conductor certificate.
    VerifyCondenser {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        eps_exp: u32,
        #[arg(long, value_enum, default_value_t = VerifyArg::Auto)]
        mode: VerifyArg,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search for a small conductor at tiny scale.
    SearchConductor {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        eps_exp: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the overhead, randomness, and degree floors.
    Bounds {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        r: u64,
        #[arg(long)]
        eps_exp: u32,
        #[arg(long)]
        delta: f64,
        /// Optional condenser parameters as K,Y,D for the degree floor.
        #[arg(long, value_delimiter = ',')]
        condenser: Option<Vec<u64>>,
    },
    /// End-to-end line-and-point walkthrough.
    DemoLinePoint {
        #[arg(long, default_value_t = 8)]
        w: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
    },
}

fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::new();
    for b in digest.iter().take(16) {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn bytes_to_bits(bytes: &[u8]) -> BitString {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &b in bytes {
        for i in (0..8).rev() {
            bits.push((b >> i) & 1);
        }
    }
    BitString::from_bits(&bits)
}

fn bits_to_bytes(bits: &BitString) -> Option<Vec<u8>> {
    if bits.len() % 8 != 0 {
        return None;
    }
    let mut out = Vec::with_capacity(bits.len() / 8);
    let mut acc = 0u8;
    for (i, b) in bits.iter().enumerate() {
        acc = (acc << 1) | b;
        if i % 8 == 7 {
            out.push(acc);
            acc = 0;
        }
    }
    Some(out)
}

fn eps_of(e: u32) -> Result<EpsilonExp, Error> {
    EpsilonExp::new(e)
}

fn write_report(path: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn bound_table(reports: &[BoundReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<52} {:>12} {:>12} {:>11} {:>9}",
        "formula", "observed", "bound", "applicable", "satisfied"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<52} {:>12.4} {:>12.4} {:>11} {:>9}",
            r.formula,
            r.observed,
            r.bound,
            r.applicable,
            if r.applicable { r.satisfied.to_string() } else { "-".into() }
        );
    }
    out
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Compress { input, target_m, eps_exp, seed, out } => {
            let bytes = fs::read(&input)?;
            let x = bytes_to_bits(&bytes);
            let e = eps_of(eps_exp)?;
            let (code, report) = compress(&x, e, target_m, &Seed::from_value(seed))?;
            fs::write(&out, code.to_file_bytes())?;
            println!("input_bits\t{}", x.len());
            println!("input_hash\t{}", content_hash(&bytes));
            println!("target_m\t{target_m}");
            println!("k\t{}", report.k);
            println!("delta\t{}", report.delta);
            println!(
                "layout\tbranch={:?} degree={} body_width={} tag_capacity={} pool_bits={}",
                report.layout.branch,
                report.layout.degree,
                report.layout.body_width,
                report.layout.tag_capacity,
                report.layout.pool_max_bits
            );
            Ok(0)
        }
        Command::Decompress { code, decompressor, condition, out } => {
            let code = Code::from_file_bytes(&fs::read(&code)?)?;
            let table = ToyDecompressor::from_text(&fs::read_to_string(&decompressor)?)?;
            let cond = condition.map(|t| BitString::from_hex_token(&t)).transpose()?;
            let view = match &cond {
                Some(c) => table.given(c),
                None => table.plain(),
            };
            let (e, k, _, _) = parse_code(&code)?;
            println!("code_bits\t{}", code.len());
            println!("eps\t{e}");
            println!("k\t{k}");
            match decompress_online(&view, &code)? {
                Some(x) => {
                    println!("recovered\t{}", x.to_hex_token());
                    if let Some(path) = out {
                        match bits_to_bytes(&x) {
                            Some(bytes) => fs::write(path, bytes)?,
                            None => fs::write(path, x.to_hex_token())?,
                        }
                    }
                }
                None => println!("recovered\t-"),
            }
            Ok(0)
        }
        Command::SimulateSw {
            scenario,
            w,
            ell,
            eps_exp,
            trials,
            seed,
            mode,
            majority_trials,
            out,
        } => {
            let e = eps_of(eps_exp)?;
            let report = simulate_sw(scenario, w, ell, e, trials, seed, mode, majority_trials)?;
            write_report(&out, &report)?;
            Ok(0)
        }
        Command::VerifyCondenser { table, k, eps_exp, mode, trials, seed } => {
            let text = fs::read_to_string(&table)?;
            let t = CondenserTable::from_text(&text)?;
            let e = eps_of(eps_exp)?;
            let mode = match mode {
                VerifyArg::Auto => VerifyMode::Auto,
                VerifyArg::Exhaustive => VerifyMode::Exhaustive,
                VerifyArg::Sampled => VerifyMode::Sampled { trials, seed },
            };
            let cert = verify_conductor(&t, k, e.eps(), mode)?;
            println!("table_hash\t{}", content_hash(text.as_bytes()));
            println!("n\t{}", t.input_bits());
            println!("degree\t{}", t.degree());
            println!("range\t{}", t.range());
            println!("k\t{k}");
            println!("eps\t{e}");
            println!("mode\t{}", if cert.exact { "exhaustive" } else { "sampled" });
            println!("trials\t{}", cert.trials);
            println!("worst_excess\t{:.6}", cert.worst_excess);
            println!("verified\t{}", cert.verified);
            if let Some(witness) = cert.worst_set {
                println!("witness\t{witness:?}");
            }
            Ok(0)
        }
        Command::SearchConductor { n, k, eps_exp, seed, out } => {
            let e = eps_of(eps_exp)?;
            let table = search_conductor(n, k, e.eps(), &Seed::from_value(seed))?;
            println!("n\t{n}");
            println!("k\t{k}");
            println!("degree\t{}", table.degree());
            println!("range\t{}", table.range());
            let text = table.to_text()?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Bounds { n, r, eps_exp, delta, condenser } => {
            let e = eps_of(eps_exp)?;
            let mut reports = vec![
                overhead_lb_check(n, e.eps(), delta),
                randomness_lb_check(n, r, e.eps(), delta),
            ];
            if let Some(kyd) = condenser {
                if kyd.len() != 3 {
                    return Err(Error::Parse("--condenser expects K,Y,D".into()));
                }
                reports.push(degree_lb_check(
                    2f64.powi(n as i32),
                    kyd[0] as f64,
                    kyd[1] as f64,
                    kyd[2],
                    e.eps(),
                ));
            }
            print!("{}", bound_table(&reports));
            Ok(0)
        }
        Command::DemoLinePoint { w, seed, trials } => {
            demo_line_point(w, seed, trials)?;
            Ok(0)
        }
    }
}

/// Builds per-sender codes for one tuple and decodes them from the gated
/// suspect stream; returns true when the whole tuple is recovered.
fn sw_round(
    inst: &SwInstance,
    suspects: &[Vec<BitString>],
    x: &[BitString],
    trial_seed: u64,
    mode: DecodeMode,
) -> Result<bool, Error> {
    let mut coords = Vec::new();
    for (j, (xj, &mj)) in x.iter().zip(&inst.targets).enumerate() {
        let (code, _) = compress(xj, inst.eps, mj, &Seed::from_value(mix(&[trial_seed, j as u64])))?;
        let (e, k, body, tag) = parse_code(&code)?;
        coords.push(CoordinateFingerprint {
            k,
            eps: e.shifted(tlc_core::compressor::PIPELINE_E_SHIFT)?,
            body,
            tag,
        });
    }
    let got = decode_multi(suspects, &coords, mix(&[trial_seed, 0x7EE]), mode)?;
    Ok(got.as_deref() == Some(x))
}

/// Smallest per-sender target whose realized budget clears `kappa_goal`.
fn target_for_budget(e: EpsilonExp, kappa_goal: u64, n: u64) -> Result<(u64, u64), Error> {
    let mut m = tlc_core::compressor::min_target_for(e, kappa_goal, n)?;
    loop {
        let k = tlc_core::compressor::choose_k(e, m, n)?;
        if k >= kappa_goal {
            return Ok((m, k));
        }
        m += 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_sw(
    scenario: ScenarioArg,
    w: u32,
    ell: usize,
    e: EpsilonExp,
    trials: u64,
    seed: u64,
    mode: ModeArg,
    majority_trials: u32,
) -> Result<String, Error> {
    let (inst, budgets, label) = match scenario {
        ScenarioArg::LinePoint => {
            let scen = line_point_toy(w, 24, &Seed::from_value(seed))?;
            let n = 2 * w as u64;
            let log_le = (2f64 / e.eps()).log2().ceil() as u64;
            let kappa_goal = (3 * w as u64) / 2 + 1 + log_le;
            let (m, kappa) = target_for_budget(e, kappa_goal, n)?;
            let budgets = vec![kappa as i64 - log_le as i64; 2];
            let inst = SwInstance {
                ell: 2,
                eps: e,
                targets: vec![m, m],
                tuples: scen.tuples,
                decompressor: scen.decompressor,
            };
            (inst, budgets, format!("line-point w={w}"))
        }
        ScenarioArg::Random => {
            let mut rng = Seed::from_value(seed).rng();
            let coord_bits = 4usize;
            let (d, tuples) = random_tuple_toy(ell, coord_bits, 16, &mut rng);
            let log_le = (ell as f64 / e.eps()).log2().ceil() as u64;
            let kappa_goal = 6 + log_le;
            let (m, kappa) = target_for_budget(e, kappa_goal, coord_bits as u64)?;
            let budgets = vec![kappa as i64 - log_le as i64; ell];
            let inst = SwInstance {
                ell,
                eps: e,
                targets: vec![m; ell],
                tuples,
                decompressor: d,
            };
            (inst, budgets, format!("random ell={ell}"))
        }
    };
    let suspects = inst.gated_suspects(&budgets)?;
    let decode_mode = match mode {
        ModeArg::Prob => DecodeMode::Probabilistic,
        ModeArg::Majority => DecodeMode::Majority { trials: majority_trials },
    };
    let mut report = String::new();
    let _ = writeln!(report, "# scenario\t{label}");
    let _ = writeln!(report, "# eps\t{e}");
    let _ = writeln!(report, "# targets\t{:?}", inst.targets);
    let _ = writeln!(report, "# budgets\t{budgets:?}");
    let _ = writeln!(report, "# seed\t{seed}");
    let _ = writeln!(report, "# trials\t{trials}");
    let _ = writeln!(report, "# instance_hash\t{}", content_hash(inst.to_text().as_bytes()));
    let _ = writeln!(report, "# gated_suspects\t{}", suspects.len());
    let bound = (1.0 - 8.0 * inst.ell as f64 * e.eps()).max(0.0);
    let _ = writeln!(report, "# success_floor\t{bound:.4}");
    let _ = writeln!(report, "tuple\tsuccesses\ttrials\trate\tci95_halfwidth\tfloor_ok");
    if suspects.is_empty() {
        let _ = writeln!(report, "# no tuple satisfies the constraints at these targets");
        return Ok(report);
    }
    let per_tuple = (trials / suspects.len().min(8) as u64).max(1);
    for (i, x) in suspects.iter().take(8).enumerate() {
        let mut ok = 0u64;
        for t in 0..per_tuple {
            if sw_round(&inst, &suspects, x, mix(&[seed, i as u64, t]), decode_mode)? {
                ok += 1;
            }
        }
        let rate = ok as f64 / per_tuple as f64;
        let half = 1.96 * (rate.max(1e-9) * (1.0 - rate).max(1e-9) / per_tuple as f64).sqrt();
        let _ = writeln!(
            report,
            "{i}\t{ok}\t{per_tuple}\t{rate:.4}\t{half:.4}\t{}",
            rate + half >= bound
        );
    }
    Ok(report)
}

fn demo_line_point(w: u32, seed: u64, trials: u64) -> Result<(), Error> {
    let e = EpsilonExp::new(3)?;
    let scen = line_point_toy(w, 24, &Seed::from_value(seed))?;
    let n = 2 * w as u64;
    let log_le = 4u64;
    let kappa_goal = (3 * w as u64) / 2 + 1 + log_le;
    let (m, kappa) = target_for_budget(e, kappa_goal, n)?;
    println!("field degree\t{w}");
    println!("coordinate bits\t{n}");
    println!("eps\t{e}");
    println!("per-sender target m\t{m}");
    println!("realized budget kappa\t{kappa}");
    println!("constraint budgets\t{}", kappa as i64 - log_le as i64);
    let budgets = vec![kappa as i64 - log_le as i64; 2];
    let inst = SwInstance {
        ell: 2,
        eps: e,
        targets: vec![m, m],
        tuples: scen.tuples,
        decompressor: scen.decompressor,
    };
    let suspects = inst.gated_suspects(&budgets)?;
    println!("gated suspects\t{}", suspects.len());
    let cert = small_slices_check(
        &suspects,
        &budgets.iter().map(|&b| 1u64 << b.max(0)).collect::<Vec<_>>(),
    )?;
    println!("small slices\t{}", cert.verified);
    let x = &suspects[scen.starred.min(suspects.len() - 1)];
    let mut ok = 0u64;
    for t in 0..trials {
        if sw_round(&inst, &suspects, x, mix(&[seed, 0xDE, t]), DecodeMode::Probabilistic)? {
            ok += 1;
        }
    }
    println!("decode successes\t{ok}/{trials}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Error::CapacityExceeded(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
