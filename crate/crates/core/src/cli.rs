//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error (bad flags,
//! malformed files, out-of-range sizes), 3 physicality error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::channel::{channel_distance, lift_unitary, SuperOperator};
use crate::extraction::{extract_from_channel, extract_from_unitary, Extraction, LeakageSpec};
use crate::generators::{average_channel, gen_ez, gen_overrotated_cz, gen_pauli_channel, gen_random_unitary, EnsembleMember};
use crate::model_io::{
    export_stim_chain, model_to_string, read_matrix_file, superoperator_to_string, operator_to_string, to_json,
    write_coefficients, write_text, LoadedMatrix, Provenance, Real, DEFAULT_FLOOR, FORMAT_VERSION,
};
use crate::pauli::{DenseOperator, PauliLabel};
use crate::settings::Settings;
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "pauli-noise", version, about = "Extract the nearest Pauli noise channel of a gate implementation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Unitary route: implemented unitary and target unitary.
    Extract {
        #[arg(long)]
        unitary: PathBuf,
        #[command(flatten)]
        shared: ExtractArgs,
    },
    /// Superoperator route: implemented channel and target unitary.
    ExtractChannel {
        #[arg(long)]
        channel: PathBuf,
        #[command(flatten)]
        shared: ExtractArgs,
    },
    /// Ensemble route: weighted average of implemented unitaries.
    AvgExtract {
        /// Repeat once per ensemble member.
        #[arg(long, required = true)]
        unitary: Vec<PathBuf>,
        /// Comma-separated member weights; uniform when omitted.
        #[arg(long)]
        weights: Option<String>,
        #[command(flatten)]
        shared: ExtractArgs,
    },
    /// Channel distance between two operator or superoperator files.
    Distance {
        /// Exactly two files; operator files are lifted to U ⊗ U*.
        #[arg(long, num_args = 1, required = true)]
        channel: Vec<PathBuf>,
        #[command(flatten)]
        tolerances: ToleranceArgs,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Write a generated operator or channel file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Worked examples.
    Demo {
        #[command(subcommand)]
        kind: DemoKind,
    },
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    target: PathBuf,
    /// Comma-separated computational basis indices inside a larger space.
    #[arg(long)]
    leakage: Option<String>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
    /// Omit model entries below this probability.
    #[arg(long)]
    floor: Option<f64>,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Also write the conditional error chain here.
    #[arg(long)]
    stim: Option<PathBuf>,
    /// Also dump the full Pauli-pair coefficient matrix here.
    #[arg(long = "full-coeffs")]
    full_coeffs: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ToleranceArgs {
    /// Unitarity / realness / sum tolerance (default 1e-9).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-qubits")]
    max_qubits: Option<usize>,
    #[arg(long = "allow-nonphysical")]
    allow_nonphysical: bool,
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// E_Z(ε) = exp(-iεZ).
    Ez {
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        #[command(flatten)]
        out: GenOutput,
    },
    /// CZ with excess phase θ on |11⟩.
    OverrotatedCz {
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[command(flatten)]
        out: GenOutput,
    },
    /// Seeded Haar-random unitary.
    RandomUnitary {
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: GenOutput,
    },
    /// Pauli channel superoperator from `LABEL=p` pairs.
    PauliChannel {
        /// e.g. `I=0.9,Z=0.1`
        #[arg(long)]
        probs: String,
        #[command(flatten)]
        out: GenOutput,
    },
}

#[derive(Args, Debug)]
struct GenOutput {
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    #[arg(long = "max-qubits")]
    max_qubits: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum DemoKind {
    /// Distances among E_Z(ε), its nearest Pauli channel, and the X-type Pauli channel.
    Triangle {
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        epsilon: f64,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 1,
        e if e.is_physicality() => 3,
        _ => 2,
    }
}

fn flag_error(flag: &str, message: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("--{flag}: {message}"))
}

fn resolve_settings(t: &ToleranceArgs) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(tol) = t.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(flag_error("tol", format!("must be a positive number, got {tol}")));
        }
        s.unitarity_tol = tol;
        s.realness_tol = tol;
        s.sum_tol = tol;
    }
    if let Some(cap) = t.max_qubits {
        if cap == 0 || cap > 15 {
            return Err(flag_error("max-qubits", format!("must be in 1..=15, got {cap}")));
        }
        s.max_qubits = cap;
        s.max_channel_qubits = cap;
    }
    s.allow_nonphysical = t.allow_nonphysical;
    Ok(s)
}

fn resolve_floor(floor: Option<f64>) -> Result<f64> {
    let f = floor.unwrap_or(DEFAULT_FLOOR);
    if !(f.is_finite() && (0.0..1.0).contains(&f)) {
        return Err(flag_error("floor", format!("must be in [0, 1), got {f}")));
    }
    Ok(f)
}

fn parse_index_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| flag_error("leakage", format!("{t:?} is not a basis index")))
        })
        .collect()
}

fn parse_weights(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| flag_error("weights", format!("{t:?} is not a number")))
        })
        .collect()
}

fn parse_probs(text: &str) -> Result<BTreeMap<PauliLabel, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',') {
        let (label, p) = item
            .split_once('=')
            .ok_or_else(|| flag_error("probs", format!("{item:?} is not LABEL=probability")))?;
        let label: PauliLabel = label.trim().parse().map_err(|e| flag_error("probs", e))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| flag_error("probs", format!("{p:?} is not a number")))?;
        if out.insert(label, p).is_some() {
            return Err(flag_error("probs", format!("label {label} given twice")));
        }
    }
    Ok(out)
}

fn load_operator(path: &Path, flag: &str) -> Result<DenseOperator> {
    match read_matrix_file(path)?.matrix {
        LoadedMatrix::Operator(op) => Ok(op),
        LoadedMatrix::Superoperator(_) => Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("kind: --{flag} expects an operator file, found a superoperator"),
        }),
    }
}

fn load_channel(path: &Path, settings: &Settings) -> Result<SuperOperator> {
    match read_matrix_file(path)?.matrix {
        LoadedMatrix::Superoperator(s) => Ok(s),
        LoadedMatrix::Operator(op) => lift_unitary(&op, settings),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

struct Outputs<'a> {
    args: &'a ExtractArgs,
    settings: Settings,
    floor: f64,
    sources: Vec<String>,
    config: BTreeMap<String, String>,
}

impl Outputs<'_> {
    fn emit(self, extraction: &Extraction) -> Result<()> {
        let mut provenance = Provenance::new(self.sources, self.settings, self.floor);
        provenance.config = self.config;
        let text = model_to_string(&extraction.model, self.floor, &provenance)?;
        match &self.args.output {
            Some(path) => {
                write_text(path, &text)?;
                let d = extraction.model.diagnostics();
                println!(
                    "wrote {}: identity_prob={:.16e} coherent_residual_sq={:.16e} distance_to_source={:.16e} leakage_weight={:.16e}",
                    path.display(),
                    d.identity_prob,
                    d.coherent_residual_sq,
                    d.distance_to_source,
                    extraction.model.leakage_weight()
                );
            }
            None => print!("{text}"),
        }
        if let Some(path) = &self.args.stim {
            write_text(path, &export_stim_chain(&extraction.model))?;
        }
        if let Some(path) = &self.args.full_coeffs {
            let meta: BTreeMap<String, String> = provenance
                .sources
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("source{i}"), s.clone()))
                .collect();
            write_coefficients(path, &extraction.coefficients, &meta)?;
        }
        Ok(())
    }
}

fn base_config(subcommand: &str, args: &ExtractArgs, floor: f64) -> BTreeMap<String, String> {
    let mut config = BTreeMap::new();
    config.insert("subcommand".to_string(), subcommand.to_string());
    config.insert("target".to_string(), display(&args.target));
    config.insert("floor".to_string(), format!("{floor:e}"));
    if let Some(l) = &args.leakage {
        config.insert("leakage".to_string(), l.clone());
    }
    for (key, path) in [("output", &args.output), ("stim", &args.stim), ("full-coeffs", &args.full_coeffs)] {
        if let Some(p) = path {
            config.insert(key.to_string(), display(p));
        }
    }
    config
}

/// Leakage spec needs the full dimension, known only once the input is read.
fn leakage_for(indices: &Option<Vec<usize>>, full_dim: usize) -> Result<Option<LeakageSpec>> {
    indices
        .as_ref()
        .map(|idx| LeakageSpec::new(full_dim, idx.clone()).map_err(|e| flag_error("leakage", e)))
        .transpose()
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Extract { unitary, shared } => {
            let settings = resolve_settings(&shared.tolerances)?;
            let floor = resolve_floor(shared.floor)?;
            let indices = shared.leakage.as_deref().map(parse_index_list).transpose()?;
            let u = load_operator(&unitary, "unitary")?;
            let u0 = load_operator(&shared.target, "target")?;
            let leakage = leakage_for(&indices, u.dim())?;
            let extraction = extract_from_unitary(&u, &u0, leakage.as_ref(), &settings)?;
            let mut config = base_config("extract", &shared, floor);
            config.insert("unitary".into(), display(&unitary));
            Outputs {
                args: &shared,
                settings,
                floor,
                sources: vec![display(&unitary), display(&shared.target)],
                config,
            }
            .emit(&extraction)
        }
        Command::ExtractChannel { channel, shared } => {
            let settings = resolve_settings(&shared.tolerances)?;
            let floor = resolve_floor(shared.floor)?;
            let indices = shared.leakage.as_deref().map(parse_index_list).transpose()?;
            let s = load_channel(&channel, &settings)?;
            let u0 = load_operator(&shared.target, "target")?;
            let leakage = leakage_for(&indices, s.dim())?;
            let extraction = extract_from_channel(&s, &u0, leakage.as_ref(), &settings)?;
            let mut config = base_config("extract-channel", &shared, floor);
            config.insert("channel".into(), display(&channel));
            Outputs {
                args: &shared,
                settings,
                floor,
                sources: vec![display(&channel), display(&shared.target)],
                config,
            }
            .emit(&extraction)
        }
        Command::AvgExtract {
            unitary,
            weights,
            shared,
        } => {
            let settings = resolve_settings(&shared.tolerances)?;
            let floor = resolve_floor(shared.floor)?;
            let indices = shared.leakage.as_deref().map(parse_index_list).transpose()?;
            let weights = match &weights {
                Some(w) => parse_weights(w)?,
                None => vec![1.0 / unitary.len() as f64; unitary.len()],
            };
            if weights.len() != unitary.len() {
                return Err(flag_error(
                    "weights",
                    format!("{} weights given for {} --unitary files", weights.len(), unitary.len()),
                ));
            }
            let members = unitary
                .iter()
                .zip(&weights)
                .map(|(path, &weight)| {
                    Ok(EnsembleMember {
                        weight,
                        unitary: load_operator(path, "unitary")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let u0 = load_operator(&shared.target, "target")?;
            let s = average_channel(&members, &settings)?;
            let leakage = leakage_for(&indices, s.dim())?;
            let extraction = extract_from_channel(&s, &u0, leakage.as_ref(), &settings)?;
            let mut config = base_config("avg-extract", &shared, floor);
            config.insert("unitary".into(), unitary.iter().map(|p| display(p)).collect::<Vec<_>>().join(","));
            config.insert("weights".into(), weights.iter().map(|w| format!("{w:e}")).collect::<Vec<_>>().join(","));
            let mut sources: Vec<String> = unitary.iter().map(|p| display(p)).collect();
            sources.push(display(&shared.target));
            Outputs {
                args: &shared,
                settings,
                floor,
                sources,
                config,
            }
            .emit(&extraction)
        }
        Command::Distance {
            channel,
            tolerances,
            output,
        } => {
            let settings = resolve_settings(&tolerances)?;
            if channel.len() != 2 {
                return Err(flag_error("channel", format!("expected exactly 2 files, got {}", channel.len())));
            }
            let a = load_channel(&channel[0], &settings)?;
            let b = load_channel(&channel[1], &settings)?;
            let d = channel_distance(&a, &b)?;
            println!("distance = {d:.16e}");
            println!("distance_sq = {:.16e}", d * d);
            if let Some(path) = output {
                let doc = DistanceDoc {
                    format_version: FORMAT_VERSION,
                    kind: "channel_distance",
                    distance: Real(d),
                    distance_sq: Real(d * d),
                    provenance: Provenance::new(channel.iter().map(|p| display(p)).collect(), settings, 0.0),
                };
                write_text(&path, &to_json(&doc)?)?;
            }
            Ok(())
        }
        Command::Gen { kind } => run_gen(kind),
        Command::Demo {
            kind: DemoKind::Triangle { epsilon, output },
        } => run_triangle(epsilon, output.as_deref()),
    }
}

#[derive(Serialize)]
struct DistanceDoc {
    format_version: u32,
    kind: &'static str,
    distance: Real,
    distance_sq: Real,
    provenance: Provenance,
}

fn gen_settings(out: &GenOutput) -> Result<Settings> {
    resolve_settings(&ToleranceArgs {
        tol: None,
        max_qubits: out.max_qubits,
        allow_nonphysical: false,
    })
}

fn emit_text(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_gen(kind: GenKind) -> Result<()> {
    let meta = |pairs: &[(&str, String)]| -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        m.insert("tool".into(), format!("{} {}", crate::model_io::TOOL_NAME, crate::model_io::TOOL_VERSION));
        m
    };
    match kind {
        GenKind::Ez { epsilon, out } => {
            let u = gen_ez(epsilon)?;
            let text = operator_to_string(&u, &meta(&[("generator", "ez".into()), ("epsilon", format!("{epsilon:e}"))]))?;
            emit_text(&out.output, &text)
        }
        GenKind::OverrotatedCz { theta, out } => {
            let u = gen_overrotated_cz(theta)?;
            let text = operator_to_string(
                &u,
                &meta(&[("generator", "overrotated-cz".into()), ("theta", format!("{theta:e}"))]),
            )?;
            emit_text(&out.output, &text)
        }
        GenKind::RandomUnitary { qubits, seed, out } => {
            let settings = gen_settings(&out)?;
            let u = gen_random_unitary(qubits, seed, &settings)?;
            let text = operator_to_string(
                &u,
                &meta(&[
                    ("generator", "random-unitary".into()),
                    ("qubits", qubits.to_string()),
                    ("seed", seed.to_string()),
                ]),
            )?;
            emit_text(&out.output, &text)
        }
        GenKind::PauliChannel { probs, out } => {
            let settings = gen_settings(&out)?;
            let parsed = parse_probs(&probs)?;
            let s = gen_pauli_channel(&parsed, &settings)?;
            let text = superoperator_to_string(&s, &meta(&[("generator", "pauli-channel".into()), ("probs", probs)]))?;
            emit_text(&out.output, &text)
        }
    }
}

/// Pairwise distances among `Ê_Z(ε)`, its nearest Pauli channel, and the
/// X-type Pauli channel with the same identity weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub epsilon: f64,
    pub unitary_to_z_pauli: f64,
    pub unitary_to_x_pauli: f64,
    pub z_pauli_to_x_pauli: f64,
}

pub fn triangle(epsilon: f64, settings: &Settings) -> Result<Triangle> {
    let ez = gen_ez(epsilon)?;
    let unitary = lift_unitary(&ez, settings)?;
    let extraction = extract_from_unitary(&ez, &DenseOperator::identity(2)?, None, settings)?;
    let z_pauli = extraction.model.to_channel(settings)?;
    let x_probs: BTreeMap<PauliLabel, f64> = [
        ("I".parse()?, extraction.model.probability(&"I".parse()?)),
        ("X".parse()?, extraction.model.probability(&"Z".parse()?)),
    ]
    .into_iter()
    .collect();
    let x_pauli = gen_pauli_channel(&x_probs, settings)?;
    Ok(Triangle {
        epsilon,
        unitary_to_z_pauli: channel_distance(&unitary, &z_pauli)?,
        unitary_to_x_pauli: channel_distance(&unitary, &x_pauli)?,
        z_pauli_to_x_pauli: channel_distance(&z_pauli, &x_pauli)?,
    })
}

#[derive(Serialize)]
struct TriangleDoc {
    format_version: u32,
    kind: &'static str,
    epsilon: Real,
    unitary_to_z_pauli: Real,
    unitary_to_x_pauli: Real,
    z_pauli_to_x_pauli: Real,
    tool_version: &'static str,
}

fn run_triangle(epsilon: f64, output: Option<&Path>) -> Result<()> {
    if !epsilon.is_finite() {
        return Err(flag_error("epsilon", "must be finite"));
    }
    let t = triangle(epsilon, &Settings::default())?;
    let (c, s) = (epsilon.cos(), epsilon.sin());
    let mut out = std::io::stdout().lock();
    let rows = [
        ("d(E_Z, E_Z^Pauli)", t.unitary_to_z_pauli, (2.0 * c * c * s * s).sqrt(), "sqrt(2) eps", 2f64.sqrt() * epsilon),
        (
            "d(E_Z, E_X^Pauli)",
            t.unitary_to_x_pauli,
            (2.0 * c * c * s * s + 2.0 * s.powi(4)).sqrt(),
            "sqrt(2) eps",
            2f64.sqrt() * epsilon,
        ),
        (
            "d(E_Z^Pauli, E_X^Pauli)",
            t.z_pauli_to_x_pauli,
            (2.0 * s.powi(4)).sqrt(),
            "sqrt(2) eps^2",
            2f64.sqrt() * epsilon * epsilon,
        ),
    ];
    let io = |e: std::io::Error| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    writeln!(out, "epsilon = {epsilon}").map_err(io)?;
    writeln!(out, "{:<26} {:>24} {:>24} {:>24}", "pair", "computed", "closed form", "leading order").map_err(io)?;
    for (name, computed, closed, lead_name, lead) in rows {
        writeln!(out, "{name:<26} {computed:>24.16e} {closed:>24.16e} {:>24}", format!("{lead_name} = {lead:.6e}"))
            .map_err(io)?;
    }
    writeln!(
        out,
        "d(E_Z,E_X^Pauli)^2 - d(E_Z,E_Z^Pauli)^2 = {:.16e}  (2 sin^4 eps = {:.16e})",
        t.unitary_to_x_pauli.powi(2) - t.unitary_to_z_pauli.powi(2),
        2.0 * s.powi(4)
    )
    .map_err(io)?;
    if let Some(path) = output {
        let doc = TriangleDoc {
            format_version: FORMAT_VERSION,
            kind: "triangle",
            epsilon: Real(epsilon),
            unitary_to_z_pauli: Real(t.unitary_to_z_pauli),
            unitary_to_x_pauli: Real(t.unitary_to_x_pauli),
            z_pauli_to_x_pauli: Real(t.z_pauli_to_x_pauli),
            tool_version: crate::model_io::TOOL_VERSION,
        };
        write_text(path, &to_json(&doc)?)?;
    }
    Ok(())
}
