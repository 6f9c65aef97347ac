//! Circuit description files.
//!
//! A circuit file is a JSON document:
//!
//! ```json
//! {
//!   "local_dims": [2, 2],
//!   "slots": [
//!     {"kind": "variable", "targets": [0]},
//!     {"kind": "fixed", "targets": [0, 1], "gate": "CNOT"},
//!     {"kind": "fixed", "targets": [1], "matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}
//!   ],
//!   "reference": {"basis": [0, 0]},
//!   "observable": {"pauli_sum": [{"coeff": 1.0, "paulis": "ZZ"}]}
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.
//! The reference is one of `{"basis": [...]}`, `{"pure": [[re, im], ...]}`
//! or `{"density": matrix}`; the observable is `{"pauli_sum": [...]}` or
//! `{"dense": matrix}`. Floats are written in shortest round-trip form, so
//! `load(save(c)) == c` bit for bit.

use std::fmt;
use std::path::Path;

use qvar_core::circuit::{
    Circuit, FixedGate, GateSlot, NamedGate, Observable, Pauli, PauliTerm, ReferenceState, SlotKind,
};
use qvar_core::{ComplexMatrix, C64};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::CliError;

type Complex = [f64; 2];
type MatrixRows = Vec<Vec<Complex>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFile {
    local_dims: Vec<usize>,
    slots: Vec<SlotFile>,
    reference: ReferenceFile,
    observable: ObservableFile,
}

#[derive(Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum SlotKindFile {
    Variable,
    Fixed,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotFile {
    kind: SlotKindFile,
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gate: Option<GateName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixRows>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ReferenceFile {
    Basis(Vec<usize>),
    Pure(Vec<Complex>),
    Density(MatrixRows),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ObservableFile {
    PauliSum(Vec<PauliTermFile>),
    Dense(MatrixRows),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PauliTermFile {
    coeff: f64,
    paulis: PauliString,
}

/// Named gate, validated while parsing so errors carry a position.
struct GateName(NamedGate);

impl Serialize for GateName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.0.name())
    }
}

impl<'de> Deserialize<'de> for GateName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = GateName;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("one of I, X, Y, Z, H, CNOT, CZ")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<GateName, E> {
                NamedGate::from_name(v)
                    .map(GateName)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        d.deserialize_str(V)
    }
}

struct PauliString(Vec<Pauli>);

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.iter().map(|p| p.as_char()).collect::<String>())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PauliString;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a string over the letters I, X, Y, Z")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<PauliString, E> {
                v.chars()
                    .map(Pauli::from_char)
                    .collect::<Option<Vec<_>>>()
                    .map(PauliString)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        d.deserialize_str(V)
    }
}

fn to_rows(m: &ComplexMatrix) -> MatrixRows {
    (0..m.rows()).map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn from_rows(rows: &MatrixRows, what: &str) -> Result<ComplexMatrix, String> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != cols) {
        return Err(format!("{what}: row {r} has {} entries, expected {cols}", row.len()));
    }
    let data = rows.iter().flatten().map(|z| C64::new(z[0], z[1])).collect();
    ComplexMatrix::new(n, cols, data).map_err(|e| format!("{what}: {e}"))
}

fn to_file(c: &Circuit) -> CircuitFile {
    let slots = c
        .slots()
        .iter()
        .map(|s| {
            let (kind, gate, matrix) = match &s.kind {
                SlotKind::Variable => (SlotKindFile::Variable, None, None),
                SlotKind::Fixed(FixedGate::Named(g)) => (SlotKindFile::Fixed, Some(GateName(*g)), None),
                SlotKind::Fixed(FixedGate::Matrix(m)) => (SlotKindFile::Fixed, None, Some(to_rows(m))),
            };
            SlotFile { kind, targets: s.targets.clone(), gate, matrix }
        })
        .collect();
    let reference = match c.reference() {
        ReferenceState::Basis(b) => ReferenceFile::Basis(b.clone()),
        ReferenceState::Pure(v) => ReferenceFile::Pure(v.iter().map(|z| [z.re, z.im]).collect()),
        ReferenceState::Density(m) => ReferenceFile::Density(to_rows(m)),
    };
    let observable = match c.observable() {
        Observable::PauliSum(terms) => ObservableFile::PauliSum(
            terms
                .iter()
                .map(|t| PauliTermFile { coeff: t.coeff, paulis: PauliString(t.paulis.clone()) })
                .collect(),
        ),
        Observable::Dense(m) => ObservableFile::Dense(to_rows(m)),
    };
    CircuitFile { local_dims: c.local_dims().to_vec(), slots, reference, observable }
}

fn from_file(f: CircuitFile) -> Result<Circuit, String> {
    let mut slots = Vec::with_capacity(f.slots.len());
    for (i, s) in f.slots.into_iter().enumerate() {
        let slot = match (s.kind, s.gate, s.matrix) {
            (SlotKindFile::Variable, None, None) => GateSlot::variable(&s.targets),
            (SlotKindFile::Variable, _, _) => {
                return Err(format!("slot {i}: a variable slot takes neither \"gate\" nor \"matrix\""))
            }
            (SlotKindFile::Fixed, Some(g), None) => GateSlot::named(g.0, &s.targets),
            (SlotKindFile::Fixed, None, Some(m)) => GateSlot::matrix(from_rows(&m, &format!("slot {i}"))?, &s.targets),
            (SlotKindFile::Fixed, _, _) => {
                return Err(format!("slot {i}: a fixed slot needs exactly one of \"gate\" or \"matrix\""))
            }
        };
        slots.push(slot);
    }
    let reference = match f.reference {
        ReferenceFile::Basis(b) => ReferenceState::Basis(b),
        ReferenceFile::Pure(v) => ReferenceState::Pure(v.iter().map(|z| C64::new(z[0], z[1])).collect()),
        ReferenceFile::Density(m) => ReferenceState::Density(from_rows(&m, "reference density")?),
    };
    let observable = match f.observable {
        ObservableFile::PauliSum(terms) => Observable::PauliSum(
            terms.into_iter().map(|t| PauliTerm { coeff: t.coeff, paulis: t.paulis.0 }).collect(),
        ),
        ObservableFile::Dense(m) => Observable::Dense(from_rows(&m, "observable")?),
    };
    Circuit::new(f.local_dims, slots, reference, observable).map_err(|e| e.to_string())
}

/// Serializes a circuit as pretty-printed JSON.
pub fn save_circuit(c: &Circuit) -> String {
    serde_json::to_string_pretty(&to_file(c)).expect("circuit files contain only finite numbers and strings")
}

/// Parses and validates a circuit. Syntax and structure errors carry the
/// line and column of the offending token.
pub fn load_circuit(text: &str) -> Result<Circuit, CliError> {
    // serde_json messages end with "at line L column C"
    let file: CircuitFile = serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
    from_file(file).map_err(CliError::Input)
}

pub fn read_circuit(path: &Path) -> Result<Circuit, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    load_circuit(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}
