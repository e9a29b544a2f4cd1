//! Command implementations and the exit-code contract.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sepsim_core::compress::{self, Stage};
use sepsim_core::decompose::{DilatedSchedule, TransposedSchedule};
use sepsim_core::minifloat::MinifloatFormat;
use sepsim_core::model::{
    count_macs, weight_bytes, weight_megabytes, CountMode, EncoderFilter, NetworkConfig,
    NetworkPlan, PadMode, Tensor1D, WeightBank, WeightTensor,
};
use sepsim_core::refexec::{ref_dilated, ref_network, ref_transposed};
use sepsim_core::simcore::{detect_nonzeros, hop_estimate, simulate_network, SimOptions};
use sepsim_core::{Error, SAMPLE_RATE};

use crate::inputs::{generate, read_pcm16, GenKind};
use crate::reports::{
    self, Analytic, AnalyticRow, CompressionSection, QuantizationSection, RunReport, Simulation,
    Totals,
};
use crate::weightfile::{Storage, WeightFile, WfError};

/// Exit codes, one per failure class.
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_WEIGHTS: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_CAPACITY: i32 = 5;
pub const EXIT_VERIFY: i32 = 6;
pub const EXIT_REALTIME: i32 = 7;

pub const EXIT_CODE_HELP: &str = "Exit codes:
  0  success
  1  file could not be read or written
  2  invalid usage, configuration, or constraint
  3  malformed weight file, or weights that do not match the config
  4  shape error between the config and the data
  5  a layer does not fit the on-chip buffers
  6  verification found a mismatch
  7  --require-realtime was set and the model missed the deadline";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    fn new(code: i32, msg: impl Into<String>) -> Self {
        CliError { code, msg: msg.into() }
    }
}

fn core_err(e: Error) -> CliError {
    let code = match &e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Weights(_) => EXIT_WEIGHTS,
        Error::Shape { .. } => EXIT_SHAPE,
        Error::BufferCapacity { .. } => EXIT_CAPACITY,
    };
    CliError::new(code, e.to_string())
}

fn wf_err(path: &std::path::Path) -> impl Fn(WfError) -> CliError + '_ {
    move |e| {
        let (code, msg) = match e {
            WfError::Io(e) => (EXIT_IO, e.to_string()),
            WfError::Malformed(m) => (EXIT_WEIGHTS, format!("malformed weight file: {m}")),
        };
        CliError::new(code, format!("{}: {msg}", path.display()))
    }
}

/// Activation/weight number formats selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Fp8b15,
    Fp8b7,
    Fp16,
    Fp4,
    Fp32,
}

impl FormatArg {
    pub fn minifloat(self) -> Option<MinifloatFormat> {
        match self {
            FormatArg::Fp8b15 => Some(MinifloatFormat::fp8_shifted()),
            FormatArg::Fp8b7 => Some(MinifloatFormat::fp8_standard()),
            FormatArg::Fp16 => Some(MinifloatFormat::fp16()),
            FormatArg::Fp4 => Some(MinifloatFormat::fp4()),
            FormatArg::Fp32 => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FormatArg::Fp8b15 => "fp8b15",
            FormatArg::Fp8b7 => "fp8b7",
            FormatArg::Fp16 => "fp16",
            FormatArg::Fp4 => "fp4",
            FormatArg::Fp32 => "fp32",
        }
    }
}

fn load_config(path: &PathBuf) -> Result<NetworkConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    NetworkConfig::from_toml_str(&text)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn build_plan(cfg: NetworkConfig) -> Result<NetworkPlan, CliError> {
    NetworkPlan::build(cfg).map_err(core_err)
}

/// Load a weight file or synthesize deterministic weights for the plan.
fn load_bank(
    plan: &NetworkPlan,
    weights: &Option<PathBuf>,
    seed: u64,
) -> Result<WeightBank, CliError> {
    match weights {
        Some(path) => WeightFile::load(path)
            .map_err(wf_err(path))?
            .into_bank(plan)
            .map_err(wf_err(path)),
        None => Ok(WeightBank::synth(plan, seed)),
    }
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Network geometry, TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Emit the report as JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let plan = build_plan(cfg.clone())?;
    let second = SAMPLE_RATE as usize;
    let naive = count_macs(&plan, second, CountMode::Naive).map_err(core_err)?;
    let decomposed = count_macs(&plan, second, CountMode::Decomposed).map_err(core_err)?;

    let per_row: Vec<AnalyticRow> = plan
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| AnalyticRow {
            row: i,
            label: row.describe(),
            weights: row.spec.weight_count(),
            naive_macs: naive.per_row[i],
            decomposed_macs: decomposed.per_row[i],
        })
        .collect();
    let analytic = Analytic {
        parameters: plan.rows.iter().map(|r| r.spec.weight_count()).sum(),
        weight_mb_fp32: weight_megabytes(&plan, 32),
        weight_mb_fp8: weight_megabytes(&plan, 8),
        naive_gmacs_per_s: naive.total as f64 / 1e9,
        decomposed_gmacs_per_s: decomposed.total as f64 / 1e9,
        enc_dec_fraction: naive.enc_dec_fraction(),
        separator_fraction: 1.0 - naive.enc_dec_fraction(),
        per_row,
    };

    let mut human = String::new();
    let _ = writeln!(
        human,
        "{} parameters, {:.3} MB at 32-bit, {:.3} MB at 8-bit",
        analytic.parameters, analytic.weight_mb_fp32, analytic.weight_mb_fp8
    );
    let _ = writeln!(
        human,
        "one second at {} kHz: naive {:.3} GMACs/s, decomposed {:.3} GMACs/s",
        SAMPLE_RATE / 1000,
        analytic.naive_gmacs_per_s,
        analytic.decomposed_gmacs_per_s
    );
    let _ = writeln!(
        human,
        "naive split: encoder+decoder {:.2}%, separator {:.2}%",
        100.0 * analytic.enc_dec_fraction,
        100.0 * analytic.separator_fraction
    );
    let _ = writeln!(
        human,
        "{:<36} {:>10} {:>16} {:>16}",
        "row", "weights", "naive macs", "decomposed"
    );
    for r in &analytic.per_row {
        let _ = writeln!(
            human,
            "{:<36} {:>10} {:>16} {:>16}",
            r.label, r.weights, r.naive_macs, r.decomposed_macs
        );
    }

    let mut report = RunReport::new("analyze", cfg);
    report.analytic = Some(analytic);
    reports::emit(args.json, &report, &human);
    Ok(0)
}

// --------------------------------------------------------------- simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Network geometry, TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Weight file; omitted means deterministic synthetic weights from --seed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Raw signed 16-bit little-endian mono PCM at 16 kHz.
    #[arg(long, conflicts_with = "gen")]
    pub input: Option<PathBuf>,
    /// Synthetic input to generate when no --input is given.
    #[arg(long, value_enum, default_value = "noise")]
    pub gen: GenKind,
    /// Synthetic input length in samples.
    #[arg(long, default_value_t = 2048)]
    pub samples: usize,
    /// Seed for synthetic weights and inputs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Activation storage format; fp32 disables quantization.
    #[arg(long, value_enum, default_value = "fp8b15")]
    pub format: FormatArg,
    /// Store activations as 32-bit floats (same as --format fp32).
    #[arg(long)]
    pub no_quantize: bool,
    /// Disable the zero-skipping broadcast (timing changes, outputs do not).
    #[arg(long)]
    pub no_zero_skip: bool,
    /// Exit nonzero unless one hop is processed within one hop of audio.
    #[arg(long)]
    pub require_realtime: bool,
    /// Clock for wall-clock figures.
    #[arg(long, default_value_t = 150_000_000)]
    pub clock_hz: u64,
    /// Corrupt one row's first output element (divergence-detection tests).
    #[arg(long, hide = true)]
    pub fault_row: Option<usize>,
    /// Emit the report as JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let cfg = load_config(&args.config)?;
    let plan = build_plan(cfg.clone())?;
    let bank = load_bank(&plan, &args.weights, args.seed)?;
    let input = match &args.input {
        Some(path) => read_pcm16(path)
            .map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?,
        None => generate(args.gen, args.samples, args.seed),
    };

    let mut opts = SimOptions::new();
    opts.zero_skip = !args.no_zero_skip;
    opts.quantize = if args.no_quantize { None } else { args.format.minifloat() };
    opts.fault_row = args.fault_row;

    let run = simulate_network(&plan, &bank, &input, &opts).map_err(core_err)?;
    let hop = hop_estimate(&plan, &run.trace, args.clock_hz);
    let totals = Totals::of(&run.trace);
    let zeros = input.iter().filter(|v| **v == 0.0).count();
    let format_name =
        if args.no_quantize { "fp32" } else { args.format.name() };
    let wall_ms = totals.cycles as f64 / args.clock_hz as f64 * 1e3;

    let sim = Simulation {
        zero_skip: opts.zero_skip,
        format: format_name.to_string(),
        input_samples: input.len(),
        input_zero_fraction: if input.is_empty() {
            0.0
        } else {
            zeros as f64 / input.len() as f64
        },
        output_lens: run.outputs.sources.iter().map(|s| s.len).collect(),
        output_zero_fraction: {
            let total: usize = run.outputs.sources.iter().map(|s| s.data.len()).sum();
            let zero: usize = run
                .outputs
                .sources
                .iter()
                .flat_map(|s| &s.data)
                .filter(|v| **v == 0.0)
                .count();
            if total == 0 { 0.0 } else { zero as f64 / total as f64 }
        },
        output_digest: reports::digest_samples(
            run.outputs.sources.iter().map(|s| s.data.as_slice()),
        ),
        totals,
        wall_ms_at_clock: wall_ms,
        clock_hz: args.clock_hz,
        realtime: hop.realtime,
        hop,
        trace: run.trace,
    };

    let mut human = String::new();
    human.push_str(&sim.trace.render_table());
    let _ = writeln!(
        human,
        "input: {} samples, {:.1}% zero; outputs: {:?} samples, {:.1}% zero, digest {}",
        sim.input_samples,
        100.0 * sim.input_zero_fraction,
        sim.output_lens,
        100.0 * sim.output_zero_fraction,
        sim.output_digest
    );
    let _ = writeln!(
        human,
        "this pass: {} cycles ({} mac + {} overhead) = {:.3} ms at {} MHz",
        sim.totals.cycles,
        sim.totals.mac_cycles,
        sim.totals.overhead_cycles,
        sim.wall_ms_at_clock,
        sim.clock_hz / 1_000_000
    );
    let _ = writeln!(
        human,
        "steady state: {:.0} cycles per {:.0} ms hop = {:.3} ms, broadcast sparsity {:.1}%",
        sim.hop.cycles_per_hop,
        sim.hop.hop_ms,
        sim.hop.ms_per_hop,
        100.0 * sim.hop.broadcast_sparsity
    );
    let _ = writeln!(
        human,
        "realtime: {}",
        if sim.hop.realtime { "yes" } else { "no" }
    );

    let realtime = sim.realtime;
    let ms = sim.hop.ms_per_hop;
    let hop_ms = sim.hop.hop_ms;
    let mut report = RunReport::new("simulate", cfg);
    report.simulation = Some(sim);
    reports::emit(args.json, &report, &human);

    if args.require_realtime && !realtime {
        return Err(CliError::new(
            EXIT_REALTIME,
            format!("real-time requirement not met: {ms:.3} ms per {hop_ms:.0} ms hop"),
        ));
    }
    Ok(0)
}

// --------------------------------------------------------------- compress

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Source network geometry, TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Structured-shrink target geometry, TOML.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Increasing magnitude thresholds for unstructured pruning.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// Storage format for the written weights; fp32 skips quantization.
    #[arg(long, value_enum, default_value = "fp8b15")]
    pub format: FormatArg,
    /// Source weight file; omitted means synthetic weights from --seed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where to write the compressed weight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Fail (exit 2) if the stored weights exceed this many bytes.
    #[arg(long)]
    pub budget_bytes: Option<u64>,
    /// Emit the report as JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

pub fn cmd_compress(args: &CompressArgs) -> Result<i32, CliError> {
    let from_cfg = load_config(&args.config)?;
    let from_plan = build_plan(from_cfg.clone())?;
    let mut bank = load_bank(&from_plan, &args.weights, args.seed)?;
    let second = SAMPLE_RATE as usize;

    let spec = compress::PruneSpec {
        target_config: None,
        thresholds: args.thresholds.clone(),
        target_weight_bytes: args.budget_bytes,
    };
    spec.validate().map_err(core_err)?;

    let naive_macs = |plan: &NetworkPlan| -> Result<f64, CliError> {
        Ok(count_macs(plan, second, CountMode::Naive).map_err(core_err)?.total as f64)
    };

    let mut stages = vec![Stage::new(
        "baseline",
        weight_bytes(&from_plan, 32) as f64,
        naive_macs(&from_plan)?,
    )];

    let plan = match &args.target {
        Some(path) => {
            let to_cfg = load_config(path)?;
            let to_plan = build_plan(to_cfg)?;
            bank = compress::structured_shrink(&bank, &from_plan, &to_plan).map_err(core_err)?;
            stages.push(Stage::new(
                "structured",
                weight_bytes(&to_plan, 32) as f64,
                naive_macs(&to_plan)?,
            ));
            to_plan
        }
        None => from_plan,
    };

    // Stored weights: everything the mask has not removed. Zeros that are not
    // masked still occupy a slot, exactly as they will in the file.
    let stored = |bank: &WeightBank| -> u64 {
        bank.tensors
            .iter()
            .map(|t| match &t.pruned {
                Some(m) => m.iter().filter(|&&gone| !gone).count() as u64,
                None => t.len() as u64,
            })
            .sum()
    };

    if !args.thresholds.is_empty() {
        let (pruned, _steps) =
            compress::prune_schedule(&bank, &args.thresholds, |_, _, _| true).map_err(core_err)?;
        bank = pruned;
        let macs = stages.last().expect("baseline stage").macs;
        stages.push(Stage::new("unstructured", stored(&bank) as f64 * 4.0, macs));
    }

    let storage = match args.format.minifloat() {
        Some(fmt) => {
            bank = compress::quantize_bank(&bank, &fmt);
            let bytes_per = (fmt.width() as f64 / 8.0).ceil();
            let macs = stages.last().expect("stage").macs;
            stages.push(Stage::new("quantized", stored(&bank) as f64 * bytes_per, macs));
            Storage::Coded(fmt)
        }
        None => Storage::Float32,
    };

    let final_weight_bytes = stages.last().expect("stage").weight_bytes;
    stages.push(Stage::new(
        "decomposed",
        final_weight_bytes,
        count_macs(&plan, second, CountMode::Decomposed).map_err(core_err)?.total as f64,
    ));

    let report = compress::report(&stages).map_err(core_err)?.with_layer_sparsity(&bank);
    let stored_count = stored(&bank);
    let masked = bank.weight_count() - stored_count;

    WeightFile::from_bank(&plan, &bank, storage).save(&args.out).map_err(wf_err(&args.out))?;

    let section = CompressionSection {
        output_path: args.out.display().to_string(),
        format: args.format.name().to_string(),
        stored_weights: stored_count,
        masked_weights: masked,
        report,
    };

    let mut human = String::new();
    human.push_str(&section.report.render_table());
    let _ = writeln!(
        human,
        "wrote {} ({} weights stored, {} masked, {})",
        section.output_path, section.stored_weights, section.masked_weights, section.format
    );

    let final_bytes = section.report.stages.last().expect("stage").weight_bytes;
    let mut report = RunReport::new("compress", plan.cfg.clone());
    report.compression = Some(section);
    reports::emit(args.json, &report, &human);

    if let Some(budget) = spec.target_weight_bytes {
        if final_bytes > budget as f64 {
            return Err(CliError::new(
                EXIT_CONFIG,
                format!("stored weights {final_bytes:.0} B exceed the budget of {budget} B"),
            ));
        }
    }
    Ok(0)
}

// --------------------------------------------------------------- quantize

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// Network geometry, TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Source weight file; omitted means synthetic weights from --seed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Target format; must be a coded format, not fp32.
    #[arg(long, value_enum, default_value = "fp8b15")]
    pub format: FormatArg,
    /// Where to write the quantized weight file.
    #[arg(long)]
    pub out: PathBuf,
    /// Emit the report as JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

pub fn cmd_quantize(args: &QuantizeArgs) -> Result<i32, CliError> {
    let fmt = args.format.minifloat().ok_or_else(|| {
        CliError::new(EXIT_CONFIG, "quantize needs a coded format, not fp32")
    })?;
    let cfg = load_config(&args.config)?;
    let plan = build_plan(cfg.clone())?;
    let bank = load_bank(&plan, &args.weights, args.seed)?;
    let quant = compress::quantize_bank(&bank, &fmt);

    let mut max_err = 0.0f64;
    let mut sum_err = 0.0f64;
    let mut count = 0u64;
    for (a, b) in bank.tensors.iter().zip(&quant.tensors) {
        for (&x, &q) in a.data.iter().zip(&b.data) {
            let e = (x - q).abs();
            max_err = max_err.max(e);
            sum_err += e;
            count += 1;
        }
    }

    WeightFile::from_bank(&plan, &quant, Storage::Coded(fmt))
        .save(&args.out)
        .map_err(wf_err(&args.out))?;

    let section = QuantizationSection {
        format: args.format.name().to_string(),
        weights: count,
        max_abs_error: max_err,
        mean_abs_error: if count == 0 { 0.0 } else { sum_err / count as f64 },
        zero_fraction: quant.zero_fraction(),
        min_normal: fmt.min_normal(),
        max_value: fmt.max_value(),
        output_path: args.out.display().to_string(),
    };

    let human = format!(
        "quantized {} weights to {} (range [{:.3e}, {:.4}])\n\
         max |error| {:.3e}, mean |error| {:.3e}, zero fraction {:.4}\n\
         wrote {}\n",
        section.weights,
        section.format,
        section.min_normal,
        section.max_value,
        section.max_abs_error,
        section.mean_abs_error,
        section.zero_fraction,
        section.output_path
    );

    let mut report = RunReport::new("quantize", cfg);
    report.quantization = Some(section);
    reports::emit(args.json, &report, &human);
    Ok(0)
}

// ----------------------------------------------------------------- verify

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random schedule instances per decomposition suite.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..=100_000))]
    pub cases: u64,
    /// Corrupt one schedule index on purpose; the run must then exit 6.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    /// Emit the report as JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, serde::Serialize)]
struct SuiteResult {
    name: &'static str,
    cases: usize,
    mismatches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_failure: Option<String>,
}

#[derive(Debug, serde::Serialize)]
struct VerifyReport {
    command: &'static str,
    seed: u64,
    injected_fault: bool,
    suites: Vec<SuiteResult>,
    pass: bool,
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Evaluate a dilated schedule by walking its published pairs, optionally
/// bumping the first real tap it meets to prove mismatches are caught.
fn eval_dilated_pairs(s: &DilatedSchedule, x: &[f64], w: &[f64], corrupt: bool) -> Vec<f64> {
    let mut pending = corrupt;
    let mut out = Vec::with_capacity(s.t_out);
    for i in 0..s.t_out {
        let mut acc = 0.0;
        for p in s.pairs(i) {
            if let Some(idx) = p.input_index {
                let tap = if pending {
                    pending = false;
                    (p.tap_index + 1) % s.kernel
                } else {
                    p.tap_index
                };
                acc += x[idx] * w[tap];
            }
        }
        out.push(acc);
    }
    out
}

fn verify_dilated(rng: &mut ChaCha8Rng, cases: usize, inject: bool) -> SuiteResult {
    let mut mismatches = 0;
    let mut first_failure = None;
    for case in 0..cases {
        // The injected run corrupts case 0, which must have at least two taps
        // and no padded slots so the bumped tap provably lands somewhere.
        let force_valid = inject && case == 0;
        let kernel = rng.gen_range(if force_valid { 2 } else { 1 }..=9usize);
        let dilation = if force_valid {
            rng.gen_range(0..=(32 / kernel).saturating_sub(1).min(7))
        } else {
            rng.gen_range(0..=7usize)
        };
        let keff = kernel + (kernel - 1) * dilation;
        let pad = if force_valid {
            PadMode::Valid
        } else if keff > 64 || rng.gen_bool(0.5) {
            PadMode::Same
        } else {
            PadMode::Valid
        };
        let t_in = match pad {
            PadMode::Valid => rng.gen_range(keff..=64.max(keff)),
            PadMode::Same => rng.gen_range(1..=64usize),
        };
        let x: Vec<f64> = (0..t_in).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let w: Vec<f64> = (0..kernel).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sched = DilatedSchedule::new(kernel, dilation, pad, t_in).expect("valid instance");
        let got = eval_dilated_pairs(&sched, &x, &w, inject && case == 0);
        let (run_out, _) = sched.run(&x, &w);
        let tensor = Tensor1D::from_samples(&x);
        let weights = WeightTensor { dims: vec![1, kernel], data: w.clone(), pruned: None };
        let reference = ref_dilated(&tensor, &weights, dilation, pad).expect("reference");
        let ok = bits_eq(&got, &reference.output.data)
            && bits_eq(&run_out, &reference.output.data);
        if !ok {
            mismatches += 1;
            first_failure.get_or_insert(format!(
                "dilated case {case}: K={kernel} d={dilation} pad={pad:?} T={t_in}"
            ));
        }
    }
    SuiteResult { name: "dilated-decomposition", cases, mismatches, first_failure }
}

fn verify_transposed(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut mismatches = 0;
    let mut first_failure = None;
    for case in 0..cases {
        let kernel = rng.gen_range(1..=9usize);
        let stride = rng.gen_range(1..=3usize);
        let t_min = ((kernel - 1).div_ceil(stride) + 1).max(2);
        let t_in = rng.gen_range(t_min..=64.max(t_min));
        let x: Vec<f64> = (0..t_in).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let w: Vec<f64> = (0..kernel).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sched = TransposedSchedule::new(kernel, stride, t_in).expect("valid instance");
        let (got, _) = sched.run(&x, &w);
        let tensor = Tensor1D::from_samples(&x);
        let weights = WeightTensor { dims: vec![1, 1, kernel], data: w.clone(), pruned: None };
        let reference = ref_transposed(&tensor, &weights, stride).expect("reference");
        if !bits_eq(&got, &reference.output.data) {
            mismatches += 1;
            first_failure.get_or_insert(format!(
                "transposed case {case}: K={kernel} s={stride} T={t_in}"
            ));
        }
    }
    SuiteResult { name: "transposed-decomposition", cases, mismatches, first_failure }
}

fn random_tiny_plan(rng: &mut ChaCha8Rng) -> NetworkPlan {
    loop {
        let s0 = rng.gen_range(2..=3usize);
        let branches = if rng.gen_bool(0.5) {
            vec![
                EncoderFilter { kernel: s0 + rng.gen_range(0..=3), stride: s0 },
                EncoderFilter { kernel: 2 * s0 + rng.gen_range(0..=3), stride: 2 * s0 },
            ]
        } else {
            vec![EncoderFilter { kernel: s0 + rng.gen_range(0..=3), stride: s0 }]
        };
        let mut cfg = NetworkConfig {
            encoder_filters: branches,
            channels: rng.gen_range(2..=5),
            bottleneck: rng.gen_range(2..=4),
            block_channels: rng.gen_range(4..=8),
            blocks_per_repeat: rng.gen_range(1..=2),
            repeats: rng.gen_range(1..=2),
            dw_kernel: rng.gen_range(2..=3),
            dilation_schedule: vec![],
            num_sources: rng.gen_range(1..=2),
            dilated_padding: if rng.gen_bool(0.5) { PadMode::Same } else { PadMode::Valid },
        };
        if cfg.finalize().is_ok() {
            if let Ok(plan) = NetworkPlan::build(cfg) {
                return plan;
            }
        }
    }
}

fn verify_simulator(rng: &mut ChaCha8Rng, cases: usize, inject: bool) -> SuiteResult {
    let mut mismatches = 0;
    let mut first_failure = None;
    for case in 0..cases {
        let plan = random_tiny_plan(rng);
        let bank = WeightBank::synth(&plan, rng.gen());
        let input: Vec<f64> = (0..rng.gen_range(128..=256))
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-1.0..=1.0) })
            .collect();

        let mut opts = SimOptions::new();
        opts.zero_skip = rng.gen_bool(0.5);
        opts.quantize = if rng.gen_bool(0.5) {
            Some(MinifloatFormat::fp8_shifted())
        } else {
            None
        };
        if inject && case == 0 {
            opts.fault_row = Some(plan.rows.len() - 1);
        }

        let sim = simulate_network(&plan, &bank, &input, &opts);
        let reference = ref_network(&plan, &bank, &input, opts.quantize.as_ref(), false);
        let ok = match (&sim, &reference) {
            (Ok(s), Ok(r)) => {
                s.outputs.sources.len() == r.outputs.sources.len()
                    && s.outputs
                        .sources
                        .iter()
                        .zip(&r.outputs.sources)
                        .all(|(a, b)| bits_eq(&a.data, &b.data))
            }
            _ => false,
        };
        if !ok {
            mismatches += 1;
            first_failure.get_or_insert(format!(
                "simulator case {case}: {} rows, quantize {}",
                plan.rows.len(),
                opts.quantize.is_some()
            ));
        }
    }
    SuiteResult { name: "simulator-vs-reference", cases, mismatches, first_failure }
}

fn verify_detector(rng: &mut ChaCha8Rng, cases: usize) -> SuiteResult {
    let mut mismatches = 0;
    let mut first_failure = None;

    let worked: Vec<f64> = vec![18.0, -2.0, 23.0, 4.0, 0.0, -3.0, 2.0, 0.0];
    let pairs = detect_nonzeros(&worked);
    let offsets: Vec<u8> = pairs.iter().map(|p| p.0).collect();
    if offsets != vec![1, 2, 3, 4, 6, 7] {
        mismatches += 1;
        first_failure = Some(format!("worked vector produced offsets {offsets:?}"));
    }

    for case in 0..cases {
        let group: Vec<f64> = (0..8)
            .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(-32.0..=32.0) })
            .collect();
        let pairs = detect_nonzeros(&group);
        let nonzero = group.iter().filter(|v| **v != 0.0).count();
        let ok = pairs.len() == nonzero
            && pairs
                .iter()
                .all(|&(off, v)| off >= 1 && group[off as usize - 1].to_bits() == v.to_bits());
        if !ok {
            mismatches += 1;
            first_failure
                .get_or_insert(format!("detector case {case}: group {group:?} -> {pairs:?}"));
        }
    }
    SuiteResult { name: "zero-detection", cases: cases + 1, mismatches, first_failure }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let cases = args.cases as usize;
    // Whole-network simulations cost far more than single schedules, so run
    // one per ten schedule cases, bounded so huge --cases stays fast.
    let sim_cases = (cases / 10).clamp(1, 10);
    let suites = vec![
        verify_dilated(&mut rng, cases, args.inject_fault),
        verify_transposed(&mut rng, cases),
        verify_simulator(&mut rng, sim_cases, args.inject_fault),
        verify_detector(&mut rng, 1000),
    ];
    let pass = suites.iter().all(|s| s.mismatches == 0);
    let report = VerifyReport {
        command: "verify",
        seed: args.seed,
        injected_fault: args.inject_fault,
        suites,
        pass,
    };

    let mut human = String::new();
    for s in &report.suites {
        let _ = writeln!(
            human,
            "{:<26} {:>5} cases  {}",
            s.name,
            s.cases,
            match &s.first_failure {
                None => "ok".to_string(),
                Some(f) => format!("{} mismatches, first: {f}", s.mismatches),
            }
        );
    }
    let _ = writeln!(human, "verify: {}", if report.pass { "pass" } else { "FAIL" });
    reports::emit(args.json, &report, &human);

    if report.pass {
        Ok(0)
    } else {
        Err(CliError::new(EXIT_VERIFY, "verification found mismatches".to_string()))
    }
}
