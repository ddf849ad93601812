//! Complex-length spectrum datasets of a mapping torus and their expansion
//! into the per-geodesic terms of the twisted trace formula.
//!
//! Text format (UTF-8, `#` starts a comment):
//!
//! ```text
//! name = example
//! volume = 4.5
//! cutoff_R = 8
//! orientation_convention = unoriented_double
//! even_multiplicity = false
//! b1 = 1
//! torsion_order = 5
//! provenance = free-form text
//! # length holonomy degree multiplicity
//! 1.25 -2.0 1 1
//! ```
//!
//! Header lines come first; each following line is one primitive geodesic.
//! A JSON object with the same keys and a `primitives` array is accepted too.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for identifying duplicate primitive rows.
pub const MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing header key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("malformed JSON dataset: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationConvention {
    /// Every oriented closed geodesic is listed.
    Oriented,
    /// Each listed geodesic stands for itself and its reverse.
    UnorientedDouble,
}

impl OrientationConvention {
    pub fn factor(self) -> f64 {
        match self {
            OrientationConvention::Oriented => 1.0,
            OrientationConvention::UnorientedDouble => 2.0,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "oriented" => Some(OrientationConvention::Oriented),
            "unoriented_double" => Some(OrientationConvention::UnorientedDouble),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            OrientationConvention::Oriented => "oriented",
            OrientationConvention::UnorientedDouble => "unoriented_double",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveGeodesic {
    pub length: f64,
    /// Rotation part of the complex length, in `(-pi, pi]`.
    pub holonomy: f64,
    /// Image in `H_1(M)/torsion = Z`.
    pub degree: i64,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDataset {
    pub name: String,
    pub volume: f64,
    #[serde(rename = "cutoff_R")]
    pub cutoff_r: f64,
    pub orientation_convention: OrientationConvention,
    pub even_multiplicity: bool,
    pub b1: i64,
    #[serde(default)]
    pub torsion_order: Option<u64>,
    #[serde(default)]
    pub provenance: String,
    /// Lower bound on the injectivity radius; primitive lengths must exceed twice it.
    #[serde(default)]
    pub injectivity_radius: f64,
    pub primitives: Vec<PrimitiveGeodesic>,
}

/// One closed geodesic `gamma = gamma_0^k` with its trace-formula weight
/// `l(gamma_0) / (|1 - e^{Cl}| |1 - e^{-Cl}|)`, scaled by multiplicity and
/// orientation factor. Cosine factors are applied at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicTerm {
    pub length: f64,
    pub primitive_length: f64,
    pub holonomy: f64,
    pub degree: i64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConsistencyWarning {
    Unsorted,
    MergedDuplicates { merged_rows: usize },
    NoGeodesicsBelowCutoff,
    AllDegreeZero,
}

impl std::fmt::Display for ConsistencyWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConsistencyWarning::Unsorted => write!(f, "primitive rows were not sorted by length; sorted"),
            ConsistencyWarning::MergedDuplicates { merged_rows } => {
                write!(f, "merged {merged_rows} duplicate primitive rows by summing multiplicities")
            }
            ConsistencyWarning::NoGeodesicsBelowCutoff => write!(f, "no geodesics below cutoff"),
            ConsistencyWarning::AllDegreeZero => {
                write!(f, "every primitive has homology degree 0; twisting has no effect")
            }
        }
    }
}

/// Reduces an angle to `(-pi, pi]`.
pub fn reduce_angle(x: f64) -> f64 {
    let mut r = x - TAU * (x / TAU).round();
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// `|1 - e^{l + i theta}|^2 |1 - e^{-l - i theta}|^2` in real arithmetic.
pub fn modulus_product_sq(length: f64, holonomy: f64) -> f64 {
    let c = holonomy.cos();
    let (ep, em) = (length.exp(), (-length).exp());
    (1.0 - 2.0 * ep * c + ep * ep) * (1.0 - 2.0 * em * c + em * em)
}

impl SpectrumDataset {
    pub fn load<R: Read>(mut source: R) -> Result<Self, DatasetError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        Self::from_str_any(&text)
    }

    pub fn from_str_any(text: &str) -> Result<Self, DatasetError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let d: SpectrumDataset = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn from_text(text: &str) -> Result<Self, DatasetError> {
        let mut name = None;
        let mut volume = None;
        let mut cutoff = None;
        let mut orientation = None;
        let mut even = None;
        let mut b1 = None;
        let mut torsion_order = None;
        let mut provenance = String::new();
        let mut injectivity_radius = 0.0;
        let mut primitives = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| DatasetError::Parse { line: line_no, message };
            if let Some((key, value)) = line.split_once('=') {
                if !primitives.is_empty() {
                    return Err(perr("header line after primitive records".into()));
                }
                let (key, value) = (key.trim(), value.trim());
                let real = |v: &str| v.parse::<f64>().map_err(|e| perr(format!("`{key}`: {e}")));
                match key {
                    "name" => name = Some(value.to_string()),
                    "volume" => volume = Some(real(value)?),
                    "cutoff_R" => cutoff = Some(real(value)?),
                    "orientation_convention" => {
                        orientation = Some(OrientationConvention::parse(value).ok_or_else(|| {
                            perr(format!("unknown orientation convention `{value}`"))
                        })?)
                    }
                    "even_multiplicity" => {
                        even = Some(value.parse::<bool>().map_err(|e| perr(format!("`{key}`: {e}")))?)
                    }
                    "b1" => b1 = Some(value.parse::<i64>().map_err(|e| perr(format!("`{key}`: {e}")))?),
                    "torsion_order" => {
                        torsion_order =
                            Some(value.parse::<u64>().map_err(|e| perr(format!("`{key}`: {e}")))?)
                    }
                    "provenance" => provenance = value.to_string(),
                    "injectivity_radius" => injectivity_radius = real(value)?,
                    _ => return Err(perr(format!("unknown header key `{key}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(perr(format!(
                    "expected `length holonomy degree multiplicity`, found {} fields",
                    fields.len()
                )));
            }
            let length = fields[0].parse::<f64>().map_err(|e| perr(format!("length: {e}")))?;
            let holonomy = fields[1].parse::<f64>().map_err(|e| perr(format!("holonomy: {e}")))?;
            let degree = fields[2].parse::<i64>().map_err(|e| perr(format!("degree: {e}")))?;
            let multiplicity =
                fields[3].parse::<u32>().map_err(|e| perr(format!("multiplicity: {e}")))?;
            primitives.push(PrimitiveGeodesic { length, holonomy, degree, multiplicity });
        }

        let d = SpectrumDataset {
            name: name.ok_or(DatasetError::MissingKey("name"))?,
            volume: volume.ok_or(DatasetError::MissingKey("volume"))?,
            cutoff_r: cutoff.ok_or(DatasetError::MissingKey("cutoff_R"))?,
            orientation_convention: orientation
                .ok_or(DatasetError::MissingKey("orientation_convention"))?,
            even_multiplicity: even.ok_or(DatasetError::MissingKey("even_multiplicity"))?,
            b1: b1.ok_or(DatasetError::MissingKey("b1"))?,
            torsion_order,
            provenance,
            injectivity_radius,
            primitives,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let invalid = |m: String| Err(DatasetError::Invalid(m));
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return invalid(format!("volume must be positive, got {}", self.volume));
        }
        if !(self.cutoff_r.is_finite() && self.cutoff_r > 0.0) {
            return invalid(format!("cutoff_R must be positive, got {}", self.cutoff_r));
        }
        if self.b1 != 1 {
            return invalid(format!("b1 must be 1, got {}", self.b1));
        }
        if !(self.injectivity_radius >= 0.0) {
            return invalid("injectivity_radius must be non-negative".into());
        }
        for (i, p) in self.primitives.iter().enumerate() {
            let row = i + 1;
            if !(p.length.is_finite() && p.length > 0.0) {
                return invalid(format!("primitive {row}: length must be positive, got {}", p.length));
            }
            if p.length <= 2.0 * self.injectivity_radius {
                return invalid(format!(
                    "primitive {row}: length {} does not exceed twice the injectivity radius {}",
                    p.length, self.injectivity_radius
                ));
            }
            if p.length > self.cutoff_r {
                return invalid(format!(
                    "primitive {row}: length {} exceeds cutoff_R {}",
                    p.length, self.cutoff_r
                ));
            }
            if !(p.holonomy > -PI && p.holonomy <= PI) {
                return invalid(format!(
                    "primitive {row}: holonomy {} outside (-pi, pi]",
                    p.holonomy
                ));
            }
            if p.multiplicity == 0 {
                return invalid(format!("primitive {row}: multiplicity must be at least 1"));
            }
        }
        Ok(())
    }

    /// Sorts rows, merges duplicates and reports anything suspicious.
    pub fn normalized(&self) -> (SpectrumDataset, Vec<ConsistencyWarning>) {
        let mut warnings = Vec::new();
        let key = |p: &PrimitiveGeodesic| (p.length, p.holonomy, p.degree);
        let sorted = self
            .primitives
            .windows(2)
            .all(|w| key(&w[0]).partial_cmp(&key(&w[1])) != Some(std::cmp::Ordering::Greater));
        let mut rows = self.primitives.clone();
        if !sorted {
            warnings.push(ConsistencyWarning::Unsorted);
            rows.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
        }
        let mut merged: Vec<PrimitiveGeodesic> = Vec::with_capacity(rows.len());
        let mut merged_rows = 0;
        for p in rows {
            // duplicates within tolerance may be separated by rows of nearby length
            let dup = merged.iter_mut().rev().take_while(|q| p.length - q.length <= MERGE_TOLERANCE).find(|q| {
                (q.length - p.length).abs() <= MERGE_TOLERANCE
                    && (q.holonomy - p.holonomy).abs() <= MERGE_TOLERANCE
                    && q.degree == p.degree
            });
            match dup {
                Some(q) => {
                    q.multiplicity += p.multiplicity;
                    merged_rows += 1;
                }
                None => merged.push(p),
            }
        }
        if merged_rows > 0 {
            warnings.push(ConsistencyWarning::MergedDuplicates { merged_rows });
        }
        if merged.is_empty() {
            warnings.push(ConsistencyWarning::NoGeodesicsBelowCutoff);
        } else if merged.iter().all(|p| p.degree == 0) {
            warnings.push(ConsistencyWarning::AllDegreeZero);
        }
        (SpectrumDataset { primitives: merged, ..self.clone() }, warnings)
    }

    /// All powers `gamma_0^k` with `k l_0 <= cutoff_R`.
    pub fn expand_powers(&self) -> Vec<GeodesicTerm> {
        let orientation = self.orientation_convention.factor();
        let mut terms = Vec::new();
        for p in &self.primitives {
            let mut k = 1u32;
            while f64::from(k) * p.length <= self.cutoff_r {
                let kf = f64::from(k);
                let length = kf * p.length;
                let raw_holonomy = kf * p.holonomy;
                let weight = f64::from(p.multiplicity) * orientation * p.length
                    / modulus_product_sq(length, raw_holonomy).sqrt();
                terms.push(GeodesicTerm {
                    length,
                    primitive_length: p.length,
                    holonomy: reduce_angle(raw_holonomy),
                    degree: i64::from(k) * p.degree,
                    weight,
                });
                k += 1;
            }
        }
        terms
    }

    /// Text rendering with 17 significant digits for every real.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "volume = {:.16e}", self.volume);
        let _ = writeln!(out, "cutoff_R = {:.16e}", self.cutoff_r);
        let _ = writeln!(out, "orientation_convention = {}", self.orientation_convention.as_str());
        let _ = writeln!(out, "even_multiplicity = {}", self.even_multiplicity);
        let _ = writeln!(out, "b1 = {}", self.b1);
        if let Some(t) = self.torsion_order {
            let _ = writeln!(out, "torsion_order = {t}");
        }
        if !self.provenance.is_empty() {
            let _ = writeln!(out, "provenance = {}", self.provenance);
        }
        if self.injectivity_radius > 0.0 {
            let _ = writeln!(out, "injectivity_radius = {:.16e}", self.injectivity_radius);
        }
        let _ = writeln!(out, "# length holonomy degree multiplicity");
        for p in &self.primitives {
            let _ = writeln!(
                out,
                "{:.16e} {:.16e} {} {}",
                p.length, p.holonomy, p.degree, p.multiplicity
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "name = test\nvolume = 2.5\ncutoff_R = 2.5\n\
        orientation_convention = oriented\neven_multiplicity = false\nb1 = 1\n";

    fn with_rows(rows: &str) -> String {
        format!("{HEADER}{rows}")
    }

    #[test]
    fn loads_minimal_file() {
        let d = SpectrumDataset::from_text(&with_rows("1.0 0 1 1\n")).unwrap();
        assert_eq!(d.primitives.len(), 1);
        assert_eq!(d.primitives[0], PrimitiveGeodesic { length: 1.0, holonomy: 0.0, degree: 1, multiplicity: 1 });
    }

    #[test]
    fn rejects_holonomy_out_of_range() {
        let err = SpectrumDataset::from_text(&with_rows("1.0 4.0 1 1\n")).unwrap_err();
        assert!(err.to_string().contains("holonomy"), "{err}");
        let err = SpectrumDataset::from_text(&with_rows(&format!("1.0 {} 1 1\n", -PI))).unwrap_err();
        assert!(matches!(err, DatasetError::Invalid(_)));
        assert!(SpectrumDataset::from_text(&with_rows(&format!("1.0 {} 1 1\n", PI))).is_ok());
    }

    #[test]
    fn rejects_bad_b1_and_lengths() {
        let text = HEADER.replace("b1 = 1", "b1 = 2");
        assert!(SpectrumDataset::from_text(&text).unwrap_err().to_string().contains("b1"));
        assert!(SpectrumDataset::from_text(&with_rows("-1.0 0 1 1\n")).is_err());
        assert!(SpectrumDataset::from_text(&with_rows("3.0 0 1 1\n")).is_err());
        let short = format!("injectivity_radius = 0.6\n{HEADER}1.0 0 1 1\n");
        assert!(SpectrumDataset::from_text(&short).unwrap_err().to_string().contains("injectivity"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match SpectrumDataset::from_text(&with_rows("1.0 0 1\n")) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
        match SpectrumDataset::from_text(&with_rows("1.0 0 1 1\nvolume = 3\n")) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            SpectrumDataset::from_text("volume = 1\n"),
            Err(DatasetError::MissingKey("name"))
        ));
    }

    #[test]
    fn json_mirror_is_accepted() {
        let d = SpectrumDataset::from_text(&with_rows("1.0 0.5 -2 3\n")).unwrap();
        let back = SpectrumDataset::from_str_any(&d.to_json()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn expands_powers_below_cutoff() {
        let d = SpectrumDataset::from_text(&with_rows("1.0 0 1 1\n")).unwrap();
        let terms = d.expand_powers();
        assert_eq!(terms.len(), 2);
        assert_eq!((terms[0].length, terms[1].length), (1.0, 2.0));
        assert_eq!(terms[1].degree, 2);
        let e = std::f64::consts::E;
        let denom = e - 2.0 + 1.0 / e;
        assert!((denom - 1.0861612696).abs() < 1e-10);
        assert!((terms[0].weight - 1.0 / denom).abs() < 1e-14);
    }

    #[test]
    fn long_primitives_contribute_nothing() {
        let mut d = SpectrumDataset::from_text(&with_rows("1.0 0 1 1\n")).unwrap();
        d.primitives[0].length = 2.4;
        d.cutoff_r = 2.0;
        assert!(d.expand_powers().is_empty());
    }

    #[test]
    fn power_holonomy_is_reduced() {
        let mut d = SpectrumDataset::from_text(&with_rows("1.0 2.0 1 1\n")).unwrap();
        d.orientation_convention = OrientationConvention::UnorientedDouble;
        let terms = d.expand_powers();
        assert!((terms[1].holonomy - (4.0 - TAU)).abs() < 1e-15);
        assert!((terms[1].holonomy + 2.2832).abs() < 1e-4);
        let oriented_weight = 1.0 / modulus_product_sq(2.0, 4.0).sqrt();
        assert!((terms[1].weight - 2.0 * oriented_weight).abs() < 1e-15);
    }

    #[test]
    fn consistency_merges_and_sorts() {
        let d = SpectrumDataset::from_text(&with_rows("2.0 0.1 1 1\n1.0 0 1 1\n1.0 0 1 2\n")).unwrap();
        let (n, warnings) = d.normalized();
        assert!(warnings.contains(&ConsistencyWarning::Unsorted));
        assert!(warnings.contains(&ConsistencyWarning::MergedDuplicates { merged_rows: 1 }));
        assert_eq!(n.primitives.len(), 2);
        assert_eq!(n.primitives[0].multiplicity, 3);
        assert_eq!(n.primitives[1].length, 2.0);
    }

    #[test]
    fn consistency_flags_empty_and_degree_zero() {
        let d = SpectrumDataset::from_text(HEADER).unwrap();
        assert_eq!(d.normalized().1, vec![ConsistencyWarning::NoGeodesicsBelowCutoff]);
        let d = SpectrumDataset::from_text(&with_rows("1.0 0 0 1\n")).unwrap();
        assert_eq!(d.normalized().1, vec![ConsistencyWarning::AllDegreeZero]);
    }

    fn dataset_strategy() -> impl Strategy<Value = SpectrumDataset> {
        let prim = (0.05f64..4.0, -3.14f64..=3.14, -5i64..=5, 1u32..4).prop_map(|(length, holonomy, degree, multiplicity)| {
            PrimitiveGeodesic { length, holonomy, degree, multiplicity }
        });
        (proptest::collection::vec(prim, 0..12), 0.1f64..10.0, 4.0f64..9.0, any::<bool>()).prop_map(
            |(primitives, volume, cutoff_r, even)| SpectrumDataset {
                name: "random".into(),
                volume,
                cutoff_r,
                orientation_convention: OrientationConvention::UnorientedDouble,
                even_multiplicity: even,
                b1: 1,
                torsion_order: Some(7),
                provenance: "proptest".into(),
                injectivity_radius: 0.0,
                primitives,
            },
        )
    }

    proptest! {
        #[test]
        fn text_round_trip(d in dataset_strategy()) {
            let back = SpectrumDataset::from_text(&d.to_text()).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn expansion_counts_and_positivity(d in dataset_strategy()) {
            let terms = d.expand_powers();
            let expected: usize = d.primitives.iter().map(|p| (d.cutoff_r / p.length).floor() as usize).sum();
            prop_assert_eq!(terms.len(), expected);
            for t in &terms {
                prop_assert!(t.length <= d.cutoff_r);
                prop_assert!(t.weight > 0.0);
                prop_assert!(t.holonomy > -PI && t.holonomy <= PI);
            }
        }

        #[test]
        fn modulus_product_matches_complex_arithmetic(l in 0.01f64..8.0, th in -3.14f64..3.14) {
            // |1 - e^z|^2 |1 - e^-z|^2 with z = l + i th
            let abs2 = |re: f64, im: f64| { let (a, b) = (1.0 - re, -im); a * a + b * b };
            let (ep, em) = (l.exp(), (-l).exp());
            let direct = abs2(ep * th.cos(), ep * th.sin()) * abs2(em * (-th).cos(), em * (-th).sin());
            let closed = modulus_product_sq(l, th);
            prop_assert!((direct - closed).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}
