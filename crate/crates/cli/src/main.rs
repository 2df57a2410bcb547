//! `codeloop` command-line driver: detection runs, threshold sweeps,
//! synthetic dataset generation, property verification and benchmarks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use codeloop::codeword::properties::{
    evaluate_row, exhaustive_suites, random_suites, Property, SuiteSummary, TrialRecord, ONE_BIT_DISAGREEING_SOURCES,
    ONE_BIT_EQUAL_SOURCES,
};
use codeloop::descriptor::{generate_pattern, load_pattern, PATCH_SIZE};
use codeloop::eval::{
    bench_codeword_learning, bench_tests_and_mask, generate_synthetic, load_ground_truth, load_manifest,
    parse_psi_list, run_sequence, score, sweep, write_pr_csv, write_timing_csv, PatchSource, Sequence, SyntheticConfig,
};
use codeloop::frontend::load_keypoint_file;
use codeloop::pipeline::write_detections_csv;
use codeloop::{DetectionParams, Roi, TestPattern};

#[derive(Parser)]
#[command(
    name = "codeloop",
    version,
    about = "Loop-closure detection with masked binary codewords"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over a frame sequence and write one row per frame.
    Detect {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "detections.csv")]
        out: PathBuf,
    },
    /// Run the detector once per matching threshold and write a PR table.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "psi-list", default_value = "8,10,12,15,18,20,22,25")]
        psi_list: String,
        #[arg(long, default_value = "pr.csv")]
        out: PathBuf,
    },
    /// Generate a synthetic sequence with a planted loop.
    Synth {
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long = "loop-start", default_value_t = 150)]
        loop_start: usize,
        #[arg(long, default_value_t = 30)]
        revisit: usize,
        #[arg(long, default_value_t = 1.0)]
        warp: f64,
        #[arg(long, default_value_t = 2.0)]
        noise: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the codeword distance properties and the one-bit tables.
    Verify {
        /// Learned patch pairs; each is also checked against five probes.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        probes: usize,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Time codeword learning.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long = "pattern-seed", default_value_t = 42)]
        pattern_seed: u64,
        #[arg(long, default_value = "timing.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Text file listing one image path per line.
    #[arg(long)]
    manifest: PathBuf,
    /// Ground-truth pairs `query matched`, one per line.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Precomputed keypoints `frame_id u v`, one per line.
    #[arg(long)]
    keypoints: Option<PathBuf>,
    #[arg(long, default_value_t = 18.0)]
    psi: f64,
    #[arg(long, default_value_t = 35)]
    upsilon: u8,
    #[arg(long, default_value_t = 100)]
    gamma: usize,
    #[arg(long, default_value_t = 20)]
    tlocal: usize,
    #[arg(long = "L", default_value_t = 512)]
    bits: usize,
    #[arg(long = "pattern-seed", default_value_t = 42)]
    pattern_seed: u64,
    #[arg(long = "pattern-file")]
    pattern_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    accept: f64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Region of interest `u0,v0,u1,v1`, inclusive.
    #[arg(long)]
    roi: Option<String>,
    #[arg(long = "no-temporal-filter")]
    no_temporal_filter: bool,
    /// Optional per-frame statistics CSV.
    #[arg(long)]
    stats: Option<PathBuf>,
}

impl RunArgs {
    fn params(&self) -> Result<DetectionParams> {
        let roi = match &self.roi {
            Some(s) => Roi::parse(s)?,
            None => Roi::full(),
        };
        let p = DetectionParams {
            psi: self.psi,
            upsilon: self.upsilon,
            gamma: self.gamma,
            bits: self.bits,
            t_local: self.tlocal,
            accept_likelihood: self.accept,
            k_consistency: self.k,
            roi,
            temporal_filter: !self.no_temporal_filter,
            ..DetectionParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    fn pattern(&self) -> Result<TestPattern> {
        let pattern = match &self.pattern_file {
            Some(f) => load_pattern(f).with_context(|| format!("loading pattern {}", f.display()))?,
            None => generate_pattern(self.pattern_seed, self.bits, (PATCH_SIZE, PATCH_SIZE))?,
        };
        if pattern.len() != self.bits {
            bail!("pattern has {} tests but --L is {}", pattern.len(), self.bits);
        }
        Ok(pattern)
    }

    fn sequence(&self) -> Result<Sequence> {
        let mut seq =
            load_manifest(&self.manifest).with_context(|| format!("loading manifest {}", self.manifest.display()))?;
        if let Some(k) = &self.keypoints {
            let kps = load_keypoint_file(k).with_context(|| format!("loading keypoints {}", k.display()))?;
            seq = seq.with_keypoints(kps);
        }
        if seq.is_empty() {
            bail!("manifest {} lists no frames", self.manifest.display());
        }
        Ok(seq)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn detect(run: &RunArgs, out: &Path) -> Result<()> {
    let params = run.params()?;
    let pattern = run.pattern()?;
    let seq = run.sequence()?;
    let gt = run.gt.as_ref().map(load_ground_truth).transpose()?;
    let result = run_sequence(&seq, &params, &pattern)?;
    let mut w = create(out)?;
    write_detections_csv(&mut w, &result.detections)?;
    w.flush()?;
    if let Some(path) = &run.stats {
        let mut w = create(path)?;
        codeloop::pipeline::write_frame_stats_csv(&mut w, &result.stats)?;
        w.flush()?;
    }
    let accepted = result
        .detections
        .iter()
        .filter(|d| d.matched_frame_id.is_some())
        .count();
    println!("frames: {}  loop closures: {accepted}", result.detections.len());
    if let Some(gt) = gt {
        let s = score(&result.detections, &gt);
        println!(
            "precision: {:.4}  recall: {:.4}  (tp {}, fp {}, fn {})",
            s.precision, s.recall, s.tp, s.fp, s.fn_
        );
    }
    Ok(())
}

fn run_sweep(run: &RunArgs, psi_list: &str, out: &Path) -> Result<()> {
    let params = run.params()?;
    let pattern = run.pattern()?;
    let seq = run.sequence()?;
    let Some(gt_path) = &run.gt else {
        bail!("sweep requires --gt");
    };
    let gt = load_ground_truth(gt_path)?;
    let psi = parse_psi_list(psi_list)?;
    let res = sweep(&seq, &params, &pattern, &psi, &gt)?;
    let mut w = create(out)?;
    write_pr_csv(&mut w, &res.points)?;
    w.flush()?;
    for p in &res.points {
        println!("psi {:>6}  precision {:.4}  recall {:.4}", p.psi, p.precision, p.recall);
    }
    println!("detections monotone in psi: {}", res.monotone);
    match res.best_recall_at_full_precision {
        Some(r) => println!("best recall at precision 1.0: {r:.4}"),
        None => println!("no threshold reached precision 1.0"),
    }
    Ok(())
}

fn synth(cfg: SyntheticConfig, out: &Path) -> Result<()> {
    let (seq, gt) = generate_synthetic(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = seq.write_pgm_dir(out)?;
    let gt_path = out.join("gt.txt");
    std::fs::write(&gt_path, gt.to_text()).with_context(|| format!("writing {}", gt_path.display()))?;
    println!("wrote {} frames, {} ground-truth pairs", seq.len(), gt.len());
    println!("manifest: {}", manifest.display());
    println!("ground truth: {}", gt_path.display());
    Ok(())
}

fn fmt_opt(v: Option<impl std::fmt::Display>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_record<W: Write>(w: &mut W, r: &TrialRecord) -> std::io::Result<()> {
    let id = match r.property {
        Property::Centroid => format!("centroid-{}", r.index),
        Property::Locality => format!("locality-{}", r.index),
    };
    writeln!(
        w,
        "{id},{},{},{:.9},{:.9},{},{}",
        r.card_m,
        fmt_opt(r.card_k),
        r.lhs,
        r.rhs,
        fmt_opt(r.lambda.map(|l| format!("{l:.9}"))),
        r.holds
    )
}

fn report(name: &str, s: &SuiteSummary) {
    println!(
        "{name}: {} cases, {} violations, {} skipped (empty mask)",
        s.cases, s.violations, s.skipped
    );
}

fn verify(trials: usize, seed: u64, probes: usize, out: &Path) -> Result<bool> {
    if trials == 0 {
        bail!("--trials must be positive");
    }
    let pattern = generate_pattern(seed, codeloop::bitcore::DEFAULT_BITS, (PATCH_SIZE, PATCH_SIZE))?;
    let mut w = create(out)?;
    writeln!(w, "trial,|y_m|,|y_k|,lhs,rhs,lambda,pass")?;
    let mut io_err = None;
    let (cen, loc) = random_suites(&pattern, seed, trials, probes, |r| {
        if io_err.is_none() {
            io_err = write_record(&mut w, r).err();
        }
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing report");
    }

    let mut ok = cen.violations == 0 && loc.violations == 0 && loc.lambda_in_unit_interval();
    report("centroid (random)", &cen);
    report("locality (random)", &loc);
    println!("lambda range: [{:.6}, {:.6}]", loc.lambda_min, loc.lambda_max);
    for len in 1..=4 {
        let (c, l) = exhaustive_suites(len)?;
        report(&format!("centroid (exhaustive L={len})"), &c);
        report(&format!("locality (exhaustive L={len})"), &l);
        ok &= c.violations == 0 && l.violations == 0;
    }

    // One-bit tables: cells with both masks set must equal the masked
    // distance; cells with an empty mask equal the directed sum.
    for (table, rows) in [
        ("table-equal", &ONE_BIT_EQUAL_SOURCES),
        ("table-disagreeing", &ONE_BIT_DISAGREEING_SOURCES),
    ] {
        for (ri, row) in rows.iter().enumerate() {
            for (ci, cell) in evaluate_row(row).iter().enumerate() {
                let computed = cell.masked.unwrap_or(cell.directed_sum as f64);
                let pass = if cell.masked.is_some() {
                    cell.masked_reproduces()
                } else {
                    cell.directed_sum_reproduces()
                };
                ok &= pass;
                writeln!(w, "{table}-r{ri}-c{ci},,,{computed:.9},{},,{pass}", cell.listed)?;
            }
        }
    }
    w.flush()?;
    println!("overall: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn bench(trials: usize, seed: u64, pattern_seed: u64, out: &Path) -> Result<()> {
    let size = (PATCH_SIZE, PATCH_SIZE);
    let source = PatchSource::Random { seed, pool: 256 };
    let p512 = generate_pattern(pattern_seed, 512, size)?;
    let p256 = generate_pattern(pattern_seed, 256, size)?;
    let learn = bench_codeword_learning(trials, &source, &p512)?;
    let t256 = bench_tests_and_mask(trials, &source, &p256)?;
    let t512 = bench_tests_and_mask(trials, &source, &p512)?;
    let rows = [
        ("codeword_learning_L512", learn),
        ("tests_and_mask_L256", t256),
        ("tests_and_mask_L512", t512),
    ];
    let mut w = create(out)?;
    write_timing_csv(&mut w, &rows)?;
    w.flush()?;
    for (name, s) in &rows {
        println!(
            "{name}: mean {:.3} us, stddev {:.3} us, max/min {:.2}",
            s.mean,
            s.stddev,
            s.max_min_ratio()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Detect { run, out } => detect(&run, &out).map(|_| true),
        Command::Sweep { run, psi_list, out } => run_sweep(&run, &psi_list, &out).map(|_| true),
        Command::Synth {
            frames,
            loop_start,
            revisit,
            warp,
            noise,
            seed,
            out,
        } => {
            let cfg = SyntheticConfig {
                n_frames: frames,
                loop_start,
                revisit_len: revisit,
                warp_magnitude: warp,
                noise_sigma: noise,
                seed,
                ..SyntheticConfig::default()
            };
            synth(cfg, &out).map(|_| true)
        }
        Command::Verify {
            trials,
            seed,
            probes,
            out,
        } => verify(trials, seed, probes, &out),
        Command::Bench {
            trials,
            seed,
            pattern_seed,
            out,
        } => bench(trials, seed, pattern_seed, &out).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
