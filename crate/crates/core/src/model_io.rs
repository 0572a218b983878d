//! JSON documents for operators, superoperators, noise models and
//! coefficient dumps, plus the conditional-probability chain exporter.
//!
//! Every real number is written with 17 significant digits so `f64` values
//! survive a write/read cycle bit for bit. Readers validate every document
//! invariant and report the offending field.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::channel::SuperOperator;
use crate::extraction::{CoefficientMatrix, Diagnostics, PauliNoiseModel};
use crate::pauli::{DenseOperator, PauliLabel};
use crate::settings::Settings;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_FLOOR: f64 = 1e-12;
pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const MODEL_SUM_TOL: f64 = 1e-9;

/// An `f64` written with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("cannot write non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Real)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Operator,
    Superoperator,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFileDoc {
    format_version: u32,
    kind: MatrixKind,
    dim: usize,
    data: Vec<[Real; 2]>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

/// Contents of an operator or superoperator file.
#[derive(Clone, Debug, PartialEq)]
pub enum LoadedMatrix {
    Operator(DenseOperator),
    Superoperator(SuperOperator),
}

impl LoadedMatrix {
    pub fn kind(&self) -> MatrixKind {
        match self {
            LoadedMatrix::Operator(_) => MatrixKind::Operator,
            LoadedMatrix::Superoperator(_) => MatrixKind::Superoperator,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDocument {
    pub matrix: LoadedMatrix,
    pub meta: BTreeMap<String, String>,
}

fn row_major_pairs(m: &DMatrix<Complex64>) -> Vec<[Real; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push([Real(z.re), Real(z.im)]);
        }
    }
    out
}

pub fn operator_to_string(op: &DenseOperator, meta: &BTreeMap<String, String>) -> Result<String> {
    let doc = MatrixFileDoc {
        format_version: FORMAT_VERSION,
        kind: MatrixKind::Operator,
        dim: op.dim(),
        data: row_major_pairs(op.matrix()),
        meta: meta.clone(),
    };
    to_json(&doc)
}

pub fn superoperator_to_string(s: &SuperOperator, meta: &BTreeMap<String, String>) -> Result<String> {
    let doc = MatrixFileDoc {
        format_version: FORMAT_VERSION,
        kind: MatrixKind::Superoperator,
        dim: s.dim(),
        data: row_major_pairs(s.matrix()),
        meta: meta.clone(),
    };
    to_json(&doc)
}

pub fn write_operator(path: &Path, op: &DenseOperator, meta: &BTreeMap<String, String>) -> Result<()> {
    write_text(path, &operator_to_string(op, meta)?)
}

pub fn write_superoperator(path: &Path, s: &SuperOperator, meta: &BTreeMap<String, String>) -> Result<()> {
    write_text(path, &superoperator_to_string(s, meta)?)
}

/// Parses a matrix document; `origin` is only used in error messages.
pub fn matrix_from_str(text: &str, origin: &Path) -> Result<MatrixDocument> {
    let doc: MatrixFileDoc = parse_json(text, origin)?;
    let bad = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    if doc.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format_version: unsupported version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.dim < 2 {
        return Err(bad(format!("dim: must be at least 2, got {}", doc.dim)));
    }
    let side = match doc.kind {
        MatrixKind::Operator => doc.dim,
        MatrixKind::Superoperator => doc.dim.checked_mul(doc.dim).ok_or_else(|| bad("dim: too large".into()))?,
    };
    let expected = side.checked_mul(side).ok_or_else(|| bad("dim: too large".into()))?;
    if doc.data.len() != expected {
        let rule = match doc.kind {
            MatrixKind::Operator => "dim²",
            MatrixKind::Superoperator => "dim⁴",
        };
        return Err(bad(format!(
            "data: has {} entries but kind={:?} with dim={} requires {rule} = {expected}",
            doc.data.len(),
            doc.kind,
            doc.dim
        )));
    }
    if let Some(k) = doc.data.iter().position(|[re, im]| !re.0.is_finite() || !im.0.is_finite()) {
        return Err(bad(format!("data[{k}]: non-finite value")));
    }
    let entries: Vec<Complex64> = doc.data.iter().map(|[re, im]| Complex64::new(re.0, im.0)).collect();
    let m = DMatrix::from_row_slice(side, side, &entries);
    let matrix = match doc.kind {
        MatrixKind::Operator => LoadedMatrix::Operator(DenseOperator::new(m).map_err(|e| bad(e.to_string()))?),
        MatrixKind::Superoperator => {
            LoadedMatrix::Superoperator(SuperOperator::new(doc.dim, m).map_err(|e| bad(e.to_string()))?)
        }
    };
    Ok(MatrixDocument { matrix, meta: doc.meta })
}

pub fn read_matrix_file(path: &Path) -> Result<MatrixDocument> {
    matrix_from_str(&read_text(path)?, path)
}

/// Run context recorded in every model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    /// Input files (or generator descriptions) the model was derived from.
    pub sources: Vec<String>,
    pub settings: Settings,
    pub floor: f64,
    /// Resolved run configuration, as flag name → value.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(sources: Vec<String>, settings: Settings, floor: f64) -> Self {
        Provenance {
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            sources,
            settings,
            floor,
            config: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEntry {
    label: PauliLabel,
    probability: Real,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnosticsDoc {
    identity_prob: Real,
    coherent_residual_sq: Real,
    distance_to_source: Real,
    truncated_weight: Real,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileDoc {
    format_version: u32,
    kind: String,
    n: usize,
    entries: Vec<ModelEntry>,
    leakage_weight: Real,
    diagnostics: DiagnosticsDoc,
    provenance: Provenance,
}

const MODEL_KIND: &str = "pauli_noise_model";

/// A model file read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedModel {
    /// Omitted (below-floor) labels come back with probability zero.
    pub model: PauliNoiseModel,
    pub truncated_weight: f64,
    pub provenance: Provenance,
}

fn validate_model_doc(doc: &ModelFileDoc, origin: &Path) -> Result<()> {
    let bad = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    if doc.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format_version: unsupported version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.kind != MODEL_KIND {
        return Err(bad(format!("kind: expected {MODEL_KIND:?}, got {:?}", doc.kind)));
    }
    if doc.n == 0 || doc.n > 31 {
        return Err(bad(format!("n: qubit count {} out of range", doc.n)));
    }
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for (k, e) in doc.entries.iter().enumerate() {
        if e.label.num_qubits() != doc.n {
            return Err(bad(format!("entries[{k}].label: {} does not act on n={} qubits", e.label, doc.n)));
        }
        if !seen.insert(e.label) {
            return Err(bad(format!("entries[{k}].label: duplicate label {}", e.label)));
        }
        let p = e.probability.0;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("entries[{k}].probability: {p} outside [0, 1]")));
        }
        total += p;
    }
    let leak = doc.leakage_weight.0;
    if !(0.0..=1.0).contains(&leak) {
        return Err(bad(format!("leakage_weight: {leak} outside [0, 1]")));
    }
    let truncated = doc.diagnostics.truncated_weight.0;
    if !(0.0..=1.0).contains(&truncated) {
        return Err(bad(format!("diagnostics.truncated_weight: {truncated} outside [0, 1]")));
    }
    let d = &doc.diagnostics;
    for (name, v) in [
        ("identity_prob", d.identity_prob.0),
        ("coherent_residual_sq", d.coherent_residual_sq.0),
        ("distance_to_source", d.distance_to_source.0),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(bad(format!("diagnostics.{name}: {v} must be finite and nonnegative")));
        }
    }
    let sum = total + truncated + leak;
    if !doc.provenance.settings.allow_nonphysical && (sum - 1.0).abs() > MODEL_SUM_TOL {
        return Err(bad(format!(
            "entries: probabilities + truncated_weight + leakage_weight = {sum:.17}, not 1 within {MODEL_SUM_TOL:e}"
        )));
    }
    Ok(())
}

/// Serializes a model; entries are sorted by descending probability then
/// label index, and entries below `floor` are folded into
/// `diagnostics.truncated_weight`.
pub fn model_to_string(model: &PauliNoiseModel, floor: f64, provenance: &Provenance) -> Result<String> {
    let mut kept: Vec<(PauliLabel, f64)> = Vec::new();
    let mut truncated = 0.0;
    for (label, &p) in model.probabilities() {
        if p < floor {
            truncated += p;
        } else {
            kept.push((*label, p));
        }
    }
    kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.index().cmp(&b.0.index())));
    let diag = model.diagnostics();
    let doc = ModelFileDoc {
        format_version: FORMAT_VERSION,
        kind: MODEL_KIND.to_string(),
        n: model.num_qubits(),
        entries: kept
            .into_iter()
            .map(|(label, p)| ModelEntry {
                label,
                probability: Real(p),
            })
            .collect(),
        leakage_weight: Real(model.leakage_weight()),
        diagnostics: DiagnosticsDoc {
            identity_prob: Real(diag.identity_prob),
            coherent_residual_sq: Real(diag.coherent_residual_sq),
            distance_to_source: Real(diag.distance_to_source),
            truncated_weight: Real(truncated),
        },
        provenance: provenance.clone(),
    };
    validate_model_doc(&doc, Path::new("<model being written>"))?;
    to_json(&doc)
}

pub fn write_model(model: &PauliNoiseModel, path: &Path, floor: f64, provenance: &Provenance) -> Result<()> {
    write_text(path, &model_to_string(model, floor, provenance)?)
}

pub fn model_from_str(text: &str, origin: &Path) -> Result<LoadedModel> {
    let doc: ModelFileDoc = parse_json(text, origin)?;
    validate_model_doc(&doc, origin)?;
    let probabilities: BTreeMap<PauliLabel, f64> = doc.entries.iter().map(|e| (e.label, e.probability.0)).collect();
    let diagnostics = Diagnostics {
        identity_prob: doc.diagnostics.identity_prob.0,
        coherent_residual_sq: doc.diagnostics.coherent_residual_sq.0,
        distance_to_source: doc.diagnostics.distance_to_source.0,
    };
    let model = PauliNoiseModel::from_parts(doc.n, probabilities, doc.leakage_weight.0, diagnostics).map_err(|e| {
        Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    Ok(LoadedModel {
        model,
        truncated_weight: doc.diagnostics.truncated_weight.0,
        provenance: doc.provenance,
    })
}

pub fn read_model(path: &Path) -> Result<LoadedModel> {
    model_from_str(&read_text(path)?, path)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientDoc {
    format_version: u32,
    kind: String,
    n: usize,
    /// Row/column order of `data`.
    labels: Vec<PauliLabel>,
    data: Vec<[Real; 2]>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

const COEFFICIENT_KIND: &str = "coefficient_matrix";

/// Full `w_PQ` dump: rows and columns in label-index order.
pub fn coefficients_to_string(w: &CoefficientMatrix, meta: &BTreeMap<String, String>) -> Result<String> {
    let n = w.num_qubits();
    let labels = (0..1usize << (2 * n))
        .map(|i| PauliLabel::from_index(n, i))
        .collect::<Result<_>>()?;
    let doc = CoefficientDoc {
        format_version: FORMAT_VERSION,
        kind: COEFFICIENT_KIND.to_string(),
        n,
        labels,
        data: row_major_pairs(w.entries()),
        meta: meta.clone(),
    };
    to_json(&doc)
}

pub fn write_coefficients(path: &Path, w: &CoefficientMatrix, meta: &BTreeMap<String, String>) -> Result<()> {
    write_text(path, &coefficients_to_string(w, meta)?)
}

pub fn coefficients_from_str(text: &str, origin: &Path) -> Result<CoefficientMatrix> {
    let doc: CoefficientDoc = parse_json(text, origin)?;
    let bad = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    if doc.format_version != FORMAT_VERSION {
        return Err(bad(format!("format_version: unsupported version {}", doc.format_version)));
    }
    if doc.kind != COEFFICIENT_KIND {
        return Err(bad(format!("kind: expected {COEFFICIENT_KIND:?}, got {:?}", doc.kind)));
    }
    if doc.n == 0 || doc.n > 15 {
        return Err(bad(format!("n: qubit count {} out of range", doc.n)));
    }
    let size = 1usize << (2 * doc.n);
    if doc.labels.len() != size || doc.labels.iter().enumerate().any(|(i, l)| l.index() != i || l.num_qubits() != doc.n) {
        return Err(bad(format!("labels: must list all {size} Pauli strings on {} qubits in index order", doc.n)));
    }
    if doc.data.len() != size * size {
        return Err(bad(format!("data: has {} entries, expected {}", doc.data.len(), size * size)));
    }
    let entries: Vec<Complex64> = doc.data.iter().map(|[re, im]| Complex64::new(re.0, im.0)).collect();
    CoefficientMatrix::new(doc.n, DMatrix::from_row_slice(size, size, &entries)).map_err(|e| bad(e.to_string()))
}

/// One instruction of a conditional error chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLine {
    pub label: PauliLabel,
    /// Probability conditioned on no earlier instruction having fired.
    pub conditional: f64,
}

/// Disjoint Pauli errors as a `CORRELATED_ERROR` / `ELSE_CORRELATED_ERROR`
/// chain. The identity term is implied by none of the lines firing.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorChain {
    pub lines: Vec<ChainLine>,
}

const PREFIX_GUARD: f64 = 1e-15;

impl ErrorChain {
    /// Builds the chain over the non-identity Paulis with positive weight, in
    /// label-index order: `p'_k = p_k / (1 − Σ_{j<k} p_j)`.
    pub fn from_model(model: &PauliNoiseModel) -> Self {
        let mut lines = Vec::new();
        let mut prefix = 0.0;
        for (label, &p) in model.probabilities() {
            if label.is_identity() || p <= 0.0 {
                continue;
            }
            let remaining = 1.0 - prefix;
            let conditional = if remaining > PREFIX_GUARD { (p / remaining).min(1.0) } else { 0.0 };
            lines.push(ChainLine {
                label: *label,
                conditional,
            });
            prefix += p;
        }
        ErrorChain { lines }
    }

    /// Unconditional probabilities `p_k = p'_k Π_{j<k} (1 − p'_j)`.
    pub fn unconditional(&self) -> Vec<(PauliLabel, f64)> {
        let mut none_yet = 1.0;
        self.lines
            .iter()
            .map(|line| {
                let p = line.conditional * none_yet;
                none_yet *= 1.0 - line.conditional;
                (line.label, p)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, line) in self.lines.iter().enumerate() {
            let op = if k == 0 { "CORRELATED_ERROR" } else { "ELSE_CORRELATED_ERROR" };
            let targets: Vec<String> = (0..line.label.num_qubits())
                .filter(|&q| line.label.factor(q) != 0)
                .map(|q| format!("{}{q}", line.label.factor_char(q)))
                .collect();
            out.push_str(&format!("{op}({}) {}\n", line.conditional, targets.join(" ")));
        }
        out
    }

    /// Parses chain text back; `num_qubits` fixes the label width.
    pub fn parse(text: &str, num_qubits: usize) -> Result<Self> {
        let mut lines = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Invalid(format!("chain line {}: {msg}: {raw:?}", lineno + 1));
            let expected = if lines.is_empty() { "CORRELATED_ERROR(" } else { "ELSE_CORRELATED_ERROR(" };
            let rest = line.strip_prefix(expected).ok_or_else(|| bad("unexpected instruction"))?;
            let (prob, targets) = rest.split_once(')').ok_or_else(|| bad("missing ')'"))?;
            let conditional: f64 = prob.trim().parse().map_err(|_| bad("bad probability"))?;
            let mut chars = vec!['I'; num_qubits];
            for t in targets.split_whitespace() {
                let (pauli, qubit) = t.split_at(1);
                let q: usize = qubit.parse().map_err(|_| bad("bad target"))?;
                if q >= num_qubits || !matches!(pauli, "X" | "Y" | "Z") {
                    return Err(bad("bad target"));
                }
                chars[q] = pauli.chars().next().expect("one char");
            }
            let label: PauliLabel = chars.iter().collect::<String>().parse()?;
            lines.push(ChainLine { label, conditional });
        }
        Ok(ErrorChain { lines })
    }
}

/// Chain text for a model; empty when the model has no non-identity weight.
pub fn export_stim_chain(model: &PauliNoiseModel) -> String {
    ErrorChain::from_model(model).to_text()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| io_error(path, source))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| io_error(path, source))
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: PathBuf::from(path),
        source,
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

/// Pretty JSON with innermost number arrays kept on one line.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PairFormatter::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Default)]
struct PairFormatter {
    indent: usize,
    has_value: bool,
    // true for arrays nested directly in another array
    stack: Vec<Frame>,
}

#[derive(Clone, Copy, PartialEq)]
enum Frame {
    Object,
    Array,
    InlineArray,
}

impl PairFormatter {
    fn inline(&self) -> bool {
        self.stack.last() == Some(&Frame::InlineArray)
    }

    fn newline<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..self.indent {
            w.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for PairFormatter {
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        let frame = match self.stack.last() {
            Some(Frame::Array) | Some(Frame::InlineArray) => Frame::InlineArray,
            _ => Frame::Array,
        };
        self.stack.push(frame);
        if frame == Frame::Array {
            self.indent += 1;
        }
        self.has_value = false;
        w.write_all(b"[")
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        let frame = self.stack.pop();
        if frame == Some(Frame::Array) {
            self.indent -= 1;
            if self.has_value {
                self.newline(w)?;
            }
        }
        w.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if self.inline() {
            return w.write_all(if first { b"" } else { b", " });
        }
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.stack.push(Frame::Object);
        self.indent += 1;
        self.has_value = false;
        w.write_all(b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.stack.pop();
        self.indent -= 1;
        if self.has_value {
            self.newline(w)?;
        }
        w.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        self.newline(w)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}
