//! JSON file formats for states, measurement sets, reports and tallies.
//!
//! ```text
//! state:        {"d_a": 2, "d_b": 2, "matrix": [[[re, im], ...], ...]}
//! measurements: {"d": 2, "settings": [{"a": 0.0, "bloch": [1.0, 0.0, 0.0]}, ...]}
//! tally:        {"settings": [2, 2], "counts": {"0,0": [[n00, n01], [n10, n11]], ...}}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, RVector};
use crate::measurements::{DichotomicObservable, MeasurementSet, Side};
use crate::simulator::TallyTable;
use crate::states::DensityMatrix;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub d_a: usize,
    pub d_b: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl From<&DensityMatrix> for StateFile {
    fn from(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        Self {
            d_a: rho.d_a(),
            d_b: rho.d_b(),
            matrix: (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<StateFile> for DensityMatrix {
    type Error = Error;

    fn try_from(f: StateFile) -> Result<Self> {
        let n = f.d_a * f.d_b;
        if f.matrix.len() != n || f.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidState {
                invariant: "dimension",
                detail: format!("matrix must be {n}x{n} for d_a={}, d_b={}", f.d_a, f.d_b),
            });
        }
        let m = CMatrix::from_fn(n, n, |r, c| {
            let [re, im] = f.matrix[r][c];
            Complex64::new(re, im)
        });
        DensityMatrix::new(f.d_a, f.d_b, m)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SettingEntry {
    pub a: f64,
    pub bloch: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub d: usize,
    pub settings: Vec<SettingEntry>,
}

impl From<&MeasurementSet> for MeasurementFile {
    fn from(set: &MeasurementSet) -> Self {
        Self {
            d: set.d(),
            settings: set
                .observables()
                .iter()
                .map(|o| SettingEntry {
                    a: o.a(),
                    bloch: o.bloch().iter().copied().collect(),
                })
                .collect(),
        }
    }
}

impl MeasurementFile {
    pub fn into_set(self, side: Side) -> Result<MeasurementSet> {
        let d = self.d;
        let obs = self
            .settings
            .into_iter()
            .map(|s| DichotomicObservable::new(d, s.a, RVector::from_vec(s.bloch)))
            .collect::<Result<Vec<_>>>()?;
        MeasurementSet::new(side, obs)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TallyFile {
    pub settings: [usize; 2],
    pub counts: BTreeMap<String, [[u64; 2]; 2]>,
}

impl From<&TallyTable> for TallyFile {
    fn from(t: &TallyTable) -> Self {
        let (n_a, n_b) = t.settings();
        let counts = (0..n_a)
            .flat_map(|x| (0..n_b).map(move |y| (x, y)))
            .map(|(x, y)| (format!("{x},{y}"), t.counts(x, y)))
            .collect();
        Self {
            settings: [n_a, n_b],
            counts,
        }
    }
}

impl TryFrom<TallyFile> for TallyTable {
    type Error = Error;

    fn try_from(f: TallyFile) -> Result<Self> {
        let [n_a, n_b] = f.settings;
        let mut t = TallyTable::new(n_a, n_b);
        for (key, cell) in f.counts {
            let parsed = key
                .split_once(',')
                .and_then(|(x, y)| Some((x.trim().parse::<usize>().ok()?, y.trim().parse::<usize>().ok()?)));
            match parsed {
                Some((x, y)) if x < n_a && y < n_b => t.set_counts(x, y, cell),
                _ => {
                    return Err(Error::InvalidParams(format!(
                        "tally key {key:?} is not a setting pair within {n_a}x{n_b}"
                    )))
                }
            }
        }
        Ok(t)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    DensityMatrix::try_from(serde_json::from_str::<StateFile>(text)?)
}

pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    DensityMatrix::try_from(read::<StateFile>(path)?)
}

pub fn write_state(path: &Path, rho: &DensityMatrix) -> Result<()> {
    Ok(fs::write(path, to_json(&StateFile::from(rho))?)?)
}

pub fn read_measurements(path: &Path, side: Side) -> Result<MeasurementSet> {
    read::<MeasurementFile>(path)?.into_set(side)
}

pub fn write_measurements(path: &Path, set: &MeasurementSet) -> Result<()> {
    Ok(fs::write(path, to_json(&MeasurementFile::from(set))?)?)
}

pub fn read_tally(path: &Path) -> Result<TallyTable> {
    TallyTable::try_from(read::<TallyFile>(path)?)
}

pub fn write_tally(path: &Path, t: &TallyTable) -> Result<()> {
    Ok(fs::write(path, to_json(&TallyFile::from(t))?)?)
}
