//! Two-line element set parsing, validation and regime classification.
//!
//! Data lines are fixed-width (69 columns). Parsing keeps enough formatting
//! state (sign style, zero padding) that a parsed record can be written back
//! byte-for-byte.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::earth;
use crate::time::Timestamp;

pub const DATA_LINE_LEN: usize = 69;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TleError {
    #[error("data line {line}: expected {expected} columns, found {found}")]
    LineLength { line: u8, expected: usize, found: usize },
    #[error("data line {line}: must start with `{line} `")]
    LineNumber { line: u8 },
    #[error("data line {line}: checksum mismatch, expected {expected} found {found}")]
    Checksum { line: u8, expected: u8, found: char },
    #[error("data line {line}: cannot parse {field} from `{text}`")]
    Field {
        line: u8,
        field: &'static str,
        text: String,
    },
    #[error("catalog numbers differ between lines ({line1} vs {line2})")]
    CatalogMismatch { line1: u32, line2: u32 },
    #[error("data line 2: {field} out of range ({value})")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("non-ASCII character in data line {line}")]
    NonAscii { line: u8 },
}

impl TleError {
    /// Data line (1 or 2) the error refers to.
    pub fn data_line(&self) -> u8 {
        match self {
            TleError::LineLength { line, .. }
            | TleError::LineNumber { line }
            | TleError::Checksum { line, .. }
            | TleError::Field { line, .. }
            | TleError::NonAscii { line } => *line,
            TleError::CatalogMismatch { .. } | TleError::OutOfRange { .. } => 2,
        }
    }
}

/// Orbital regime bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrbitRegime {
    #[serde(rename = "LEO")]
    Leo,
    #[serde(rename = "MEO")]
    Meo,
    #[serde(rename = "GEO")]
    Geo,
    #[serde(rename = "HEO")]
    Heo,
}

impl OrbitRegime {
    pub const ALL: [OrbitRegime; 4] = [
        OrbitRegime::Leo,
        OrbitRegime::Meo,
        OrbitRegime::Geo,
        OrbitRegime::Heo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OrbitRegime::Leo => "LEO",
            OrbitRegime::Meo => "MEO",
            OrbitRegime::Geo => "GEO",
            OrbitRegime::Heo => "HEO",
        }
    }
}

impl fmt::Display for OrbitRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OrbitRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LEO" => Ok(OrbitRegime::Leo),
            "MEO" => Ok(OrbitRegime::Meo),
            "GEO" => Ok(OrbitRegime::Geo),
            "HEO" => Ok(OrbitRegime::Heo),
            other => Err(format!("unknown orbit regime `{other}`")),
        }
    }
}

/// A value in the TLE "assumed decimal point" exponent notation, e.g. `-11606-4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedExponent {
    /// Signed five-digit mantissa; the value is `0.mantissa`.
    pub mantissa: i32,
    pub exponent: u8,
    pub exponent_negative: bool,
}

impl PackedExponent {
    pub fn value(&self) -> f64 {
        let exp = if self.exponent_negative {
            -(self.exponent as i32)
        } else {
            self.exponent as i32
        };
        self.mantissa as f64 * 1e-5 * 10f64.powi(exp)
    }

    fn parse(field: &str, line: u8, name: &'static str) -> Result<Self, TleError> {
        let bad = || TleError::Field {
            line,
            field: name,
            text: field.to_string(),
        };
        let bytes = field.as_bytes();
        if bytes.len() != 8 {
            return Err(bad());
        }
        let negative = match bytes[0] {
            b'-' => true,
            b' ' | b'+' => false,
            _ => return Err(bad()),
        };
        let digits = field[1..6].trim_start();
        let mantissa: i32 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let exponent_negative = match bytes[6] {
            b'-' => true,
            b'+' | b' ' => false,
            _ => return Err(bad()),
        };
        if !bytes[7].is_ascii_digit() {
            return Err(bad());
        }
        Ok(Self {
            mantissa: if negative { -mantissa } else { mantissa },
            exponent: bytes[7] - b'0',
            exponent_negative,
        })
    }

    fn format(&self, plus: bool) -> String {
        let sign = signed_prefix(self.mantissa < 0, plus);
        let esign = if self.exponent_negative { '-' } else { '+' };
        format!("{sign}{:05}{esign}{}", self.mantissa.unsigned_abs(), self.exponent)
    }
}

/// Column-formatting conventions observed on the source lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TleStyle {
    /// Non-negative signed fields on line 1 carry `+` instead of a blank.
    pub explicit_plus: bool,
    /// Angle and mean-motion fields on line 2 are zero padded (`098.5303`).
    pub zero_padded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TleRecord {
    pub name: String,
    pub norad_id: u32,
    pub classification: char,
    pub international_designator: String,
    /// Two-digit year; 57..=99 map to 19xx, 00..=56 to 20xx.
    pub epoch_year: u8,
    pub epoch_day: f64,
    /// First derivative of mean motion / 2, rev/day².
    pub mean_motion_dot: f64,
    pub mean_motion_ddot: PackedExponent,
    /// Drag term, inverse Earth radii.
    pub b_star: PackedExponent,
    pub ephemeris_type: char,
    pub element_set_number: u16,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub eccentricity: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
    pub mean_motion_rev_per_day: f64,
    pub rev_number: u32,
    pub style: TleStyle,
}

/// Modulo-10 TLE checksum over the first 68 columns: digits count their
/// value, `-` counts one, everything else zero.
pub fn checksum(line: &str) -> u8 {
    let sum: u32 = line
        .bytes()
        .take(DATA_LINE_LEN - 1)
        .map(|b| match b {
            b'0'..=b'9' => (b - b'0') as u32,
            b'-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

fn signed_prefix(negative: bool, plus: bool) -> char {
    if negative {
        '-'
    } else if plus {
        '+'
    } else {
        ' '
    }
}

fn validate_line(raw: &str, line: u8) -> Result<&str, TleError> {
    let text = raw.trim_end();
    if !text.is_ascii() {
        return Err(TleError::NonAscii { line });
    }
    if text.len() != DATA_LINE_LEN {
        return Err(TleError::LineLength {
            line,
            expected: DATA_LINE_LEN,
            found: text.len(),
        });
    }
    let tag = (b'0' + line) as char;
    let mut chars = text.chars();
    if chars.next() != Some(tag) || chars.next() != Some(' ') {
        return Err(TleError::LineNumber { line });
    }
    let expected = checksum(text);
    let found = text.as_bytes()[DATA_LINE_LEN - 1] as char;
    if found.to_digit(10) != Some(expected as u32) {
        return Err(TleError::Checksum {
            line,
            expected,
            found,
        });
    }
    Ok(text)
}

fn field<T: std::str::FromStr>(text: &str, line: u8, name: &'static str) -> Result<T, TleError> {
    let t = text.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    t.parse().map_err(|_| TleError::Field {
        line,
        field: name,
        text: text.to_string(),
    })
}

impl TleRecord {
    /// Parses a block of one optional name line plus two data lines.
    pub fn parse(name: &str, line1: &str, line2: &str) -> Result<Self, TleError> {
        let l1 = validate_line(line1, 1)?;
        let l2 = validate_line(line2, 2)?;

        let norad_id: u32 = field(&l1[2..7], 1, "catalog number")?;
        let classification = l1.as_bytes()[7] as char;
        let international_designator = l1[9..17].trim_end().to_string();
        let epoch_year: u8 = field(&l1[18..20], 1, "epoch year")?;
        let epoch_day: f64 = field(&l1[20..32], 1, "epoch day")?;
        if !(0.0..367.0).contains(&epoch_day) {
            return Err(TleError::Field {
                line: 1,
                field: "epoch day",
                text: l1[20..32].to_string(),
            });
        }
        let mean_motion_dot = parse_signed_fraction(&l1[33..43])?;
        let mean_motion_ddot = PackedExponent::parse(&l1[44..52], 1, "second derivative")?;
        let b_star = PackedExponent::parse(&l1[53..61], 1, "drag term")?;
        let ephemeris_type = l1.as_bytes()[62] as char;
        let element_set_number: u16 = field(&l1[64..68], 1, "element set number")?;

        let norad_2: u32 = field(&l2[2..7], 2, "catalog number")?;
        if norad_2 != norad_id {
            return Err(TleError::CatalogMismatch {
                line1: norad_id,
                line2: norad_2,
            });
        }
        let inclination_deg: f64 = field(&l2[8..16], 2, "inclination")?;
        let raan_deg: f64 = field(&l2[17..25], 2, "right ascension")?;
        let ecc_digits = &l2[26..33];
        if !ecc_digits.bytes().all(|b| b.is_ascii_digit() || b == b' ') {
            return Err(TleError::Field {
                line: 2,
                field: "eccentricity",
                text: ecc_digits.to_string(),
            });
        }
        let eccentricity: f64 = field::<f64>(&format!("0.{}", ecc_digits.replace(' ', "0")), 2, "eccentricity")?;
        let arg_perigee_deg: f64 = field(&l2[34..42], 2, "argument of perigee")?;
        let mean_anomaly_deg: f64 = field(&l2[43..51], 2, "mean anomaly")?;
        let mean_motion_rev_per_day: f64 = field(&l2[52..63], 2, "mean motion")?;
        let rev_number: u32 = if l2[63..68].trim().is_empty() {
            0
        } else {
            field(&l2[63..68], 2, "revolution number")?
        };

        if !(0.0..=180.0).contains(&inclination_deg) {
            return Err(TleError::OutOfRange {
                field: "inclination",
                value: inclination_deg,
            });
        }
        for (name, value) in [
            ("right ascension", raan_deg),
            ("argument of perigee", arg_perigee_deg),
            ("mean anomaly", mean_anomaly_deg),
        ] {
            if !(0.0..360.0).contains(&value) {
                return Err(TleError::OutOfRange { field: name, value });
            }
        }
        if mean_motion_rev_per_day <= 0.0 {
            return Err(TleError::OutOfRange {
                field: "mean motion",
                value: mean_motion_rev_per_day,
            });
        }

        let style = TleStyle {
            explicit_plus: [&l1[33..34], &l1[44..45], &l1[53..54]].contains(&"+"),
            zero_padded: [&l2[8..9], &l2[17..18], &l2[34..35], &l2[43..44], &l2[52..53]]
                .contains(&"0"),
        };

        let name = name.trim();
        let name = name.strip_prefix("0 ").unwrap_or(name).trim();
        Ok(Self {
            name: if name.is_empty() {
                norad_id.to_string()
            } else {
                name.to_string()
            },
            norad_id,
            classification,
            international_designator,
            epoch_year,
            epoch_day,
            mean_motion_dot,
            mean_motion_ddot,
            b_star,
            ephemeris_type,
            element_set_number,
            inclination_deg,
            raan_deg,
            eccentricity,
            arg_perigee_deg,
            mean_anomaly_deg,
            mean_motion_rev_per_day,
            rev_number,
            style,
        })
    }

    /// Four-digit epoch year with the 57 pivot.
    pub fn full_epoch_year(&self) -> i32 {
        if self.epoch_year >= 57 {
            1900 + self.epoch_year as i32
        } else {
            2000 + self.epoch_year as i32
        }
    }

    pub fn epoch(&self) -> Timestamp {
        Timestamp::from_year_day(self.full_epoch_year(), self.epoch_day)
    }

    /// Semi-major axis (km) from the mean motion via Kepler's third law.
    pub fn semi_major_axis_km(&self) -> f64 {
        let n = self.mean_motion_rad_per_sec();
        (earth::MU_KM3_S2 / (n * n)).cbrt()
    }

    pub fn mean_motion_rad_per_sec(&self) -> f64 {
        self.mean_motion_rev_per_day * std::f64::consts::TAU / 86_400.0
    }

    pub fn apogee_altitude_km(&self) -> f64 {
        self.semi_major_axis_km() * (1.0 + self.eccentricity) - earth::RADIUS_KM
    }

    pub fn perigee_altitude_km(&self) -> f64 {
        self.semi_major_axis_km() * (1.0 - self.eccentricity) - earth::RADIUS_KM
    }

    /// Writes both data lines with freshly computed checksums.
    pub fn format_lines(&self) -> (String, String) {
        let plus = self.style.explicit_plus;
        let dot_sign = signed_prefix(self.mean_motion_dot < 0.0, plus);
        let dot = format!("{:.8}", self.mean_motion_dot.abs());
        let dot = dot.strip_prefix('0').unwrap_or(&dot);
        let mut l1 = format!(
            "1 {:05}{} {:<8} {:02}{:012.8} {}{} {} {} {} {:>4}",
            self.norad_id,
            self.classification,
            self.international_designator,
            self.epoch_year,
            self.epoch_day,
            dot_sign,
            dot,
            self.mean_motion_ddot.format(plus),
            self.b_star.format(plus),
            self.ephemeris_type,
            self.element_set_number,
        );
        let ecc = format!("{:07}", (self.eccentricity * 1e7).round() as u64);
        let mut l2 = if self.style.zero_padded {
            format!(
                "2 {:05} {:08.4} {:08.4} {} {:08.4} {:08.4} {:011.8}{:>5}",
                self.norad_id,
                self.inclination_deg,
                self.raan_deg,
                ecc,
                self.arg_perigee_deg,
                self.mean_anomaly_deg,
                self.mean_motion_rev_per_day,
                self.rev_number,
            )
        } else {
            format!(
                "2 {:05} {:8.4} {:8.4} {} {:8.4} {:8.4} {:11.8}{:>5}",
                self.norad_id,
                self.inclination_deg,
                self.raan_deg,
                ecc,
                self.arg_perigee_deg,
                self.mean_anomaly_deg,
                self.mean_motion_rev_per_day,
                self.rev_number,
            )
        };
        let c1 = checksum(&l1);
        l1.push((b'0' + c1) as char);
        let c2 = checksum(&l2);
        l2.push((b'0' + c2) as char);
        (l1, l2)
    }

    /// Three-line text block (`0 NAME` header plus data lines).
    pub fn to_block(&self) -> String {
        let (l1, l2) = self.format_lines();
        format!("0 {}\n{l1}\n{l2}\n", self.name)
    }
}

fn parse_signed_fraction(text: &str) -> Result<f64, TleError> {
    let bad = || TleError::Field {
        line: 1,
        field: "first derivative",
        text: text.to_string(),
    };
    let (negative, rest) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') | Some(b' ') => (false, &text[1..]),
        _ => return Err(bad()),
    };
    let rest = rest.trim();
    let value: f64 = if rest.starts_with('.') {
        format!("0{rest}").parse().map_err(|_| bad())?
    } else {
        rest.parse().map_err(|_| bad())?
    };
    Ok(if negative { -value } else { value })
}

/// Regime boundaries used by [`classify_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeThresholds {
    pub heo_min_eccentricity: f64,
    pub geo_semi_major_axis_km: f64,
    pub geo_band_km: f64,
    pub leo_max_apogee_altitude_km: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            heo_min_eccentricity: 0.25,
            geo_semi_major_axis_km: 42_164.0,
            geo_band_km: 200.0,
            leo_max_apogee_altitude_km: 2_000.0,
        }
    }
}

pub fn classify_regime(record: &TleRecord, thresholds: &RegimeThresholds) -> OrbitRegime {
    let a = record.semi_major_axis_km();
    if record.eccentricity >= thresholds.heo_min_eccentricity {
        OrbitRegime::Heo
    } else if (a - thresholds.geo_semi_major_axis_km).abs() <= thresholds.geo_band_km {
        OrbitRegime::Geo
    } else if record.apogee_altitude_km() < thresholds.leo_max_apogee_altitude_km {
        OrbitRegime::Leo
    } else {
        OrbitRegime::Meo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    FailFast,
    #[default]
    SkipAndReport,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub policy: ErrorPolicy,
    pub thresholds: RegimeThresholds,
}

/// A parse problem tied to a 1-based line of the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line:{}: {}", self.line, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog input is empty")]
    Empty,
    #[error("line:{line}: {source}")]
    Parse { line: usize, source: TleError },
    #[error("line:{line}: {message}")]
    Structure { line: usize, message: String },
    #[error("line:{line}: duplicate NORAD id {norad_id}")]
    Duplicate { line: usize, norad_id: u32 },
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    records: Vec<TleRecord>,
    regimes: Vec<OrbitRegime>,
    regime_index: BTreeMap<OrbitRegime, Vec<usize>>,
    by_id: HashMap<u32, usize>,
}

impl Catalog {
    /// Builds a catalog; the first duplicate NORAD id is returned as an error.
    pub fn from_records(
        records: Vec<TleRecord>,
        thresholds: &RegimeThresholds,
    ) -> Result<Self, u32> {
        let mut catalog = Catalog::default();
        for record in records {
            if catalog.by_id.contains_key(&record.norad_id) {
                return Err(record.norad_id);
            }
            catalog.upsert(record, thresholds);
        }
        Ok(catalog)
    }

    /// Inserts or replaces (by NORAD id) a record. Returns true on replacement.
    fn upsert(&mut self, record: TleRecord, thresholds: &RegimeThresholds) -> bool {
        let regime = classify_regime(&record, thresholds);
        if let Some(&idx) = self.by_id.get(&record.norad_id) {
            let old = self.regimes[idx];
            if old != regime {
                self.regime_index
                    .get_mut(&old)
                    .expect("indexed")
                    .retain(|&i| i != idx);
                let bucket = self.regime_index.entry(regime).or_default();
                let pos = bucket.partition_point(|&i| i < idx);
                bucket.insert(pos, idx);
            }
            self.records[idx] = record;
            self.regimes[idx] = regime;
            true
        } else {
            let idx = self.records.len();
            self.by_id.insert(record.norad_id, idx);
            self.records.push(record);
            self.regimes.push(regime);
            self.regime_index.entry(regime).or_default().push(idx);
            false
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TleRecord] {
        &self.records
    }

    pub fn regime_of(&self, index: usize) -> OrbitRegime {
        self.regimes[index]
    }

    /// Record indices in catalog order for one regime.
    pub fn bucket(&self, regime: OrbitRegime) -> &[usize] {
        self.regime_index
            .get(&regime)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn index_of(&self, norad_id: u32) -> Option<usize> {
        self.by_id.get(&norad_id).copied()
    }

    pub fn get(&self, norad_id: u32) -> Option<&TleRecord> {
        self.index_of(norad_id).map(|i| &self.records[i])
    }

    pub fn regime_counts(&self) -> BTreeMap<OrbitRegime, usize> {
        OrbitRegime::ALL
            .iter()
            .map(|&r| (r, self.bucket(r).len()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CatalogLoad {
    pub catalog: Catalog,
    pub diagnostics: Vec<Diagnostic>,
}

fn is_data_line(line: &str, tag: char) -> bool {
    let mut chars = line.chars();
    chars.next() == Some(tag) && chars.next() == Some(' ')
}

/// Reads concatenated 2-line or 3-line TLE blocks.
pub fn load_catalog<R: BufRead>(source: R, options: &LoadOptions) -> Result<CatalogLoad, CatalogError> {
    let mut lines = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    if lines.is_empty() {
        return Err(CatalogError::Empty);
    }

    let fail_fast = options.policy == ErrorPolicy::FailFast;
    let mut catalog = Catalog::default();
    let mut diagnostics = Vec::new();
    let mut cursor = 0;

    while cursor < lines.len() {
        let (first_no, first) = &lines[cursor];
        let (name, l1_at) = if is_data_line(first, '1') {
            ("", cursor)
        } else {
            (first.as_str(), cursor + 1)
        };
        let l2_at = l1_at + 1;
        let structural = match (lines.get(l1_at), lines.get(l2_at)) {
            (Some((_, l1)), Some((_, l2))) if is_data_line(l1, '1') && is_data_line(l2, '2') => None,
            (Some((n, l1)), _) if !is_data_line(l1, '1') => {
                Some((*n, "expected data line 1".to_string()))
            }
            (Some((n, _)), None) => Some((*n, "missing data line 2".to_string())),
            (Some(_), Some((n, _))) => Some((*n, "expected data line 2".to_string())),
            (None, _) => Some((*first_no, "truncated element set".to_string())),
        };
        if let Some((line, message)) = structural {
            if fail_fast {
                return Err(CatalogError::Structure { line, message });
            }
            diagnostics.push(Diagnostic { line, message });
            cursor += 1;
            continue;
        }

        let (l1_no, l1) = &lines[l1_at];
        let (l2_no, l2) = &lines[l2_at];
        cursor = l2_at + 1;
        match TleRecord::parse(name, l1, l2) {
            Ok(record) => {
                let norad_id = record.norad_id;
                if catalog.index_of(norad_id).is_some() {
                    if fail_fast {
                        return Err(CatalogError::Duplicate {
                            line: *l1_no,
                            norad_id,
                        });
                    }
                    diagnostics.push(Diagnostic {
                        line: *l1_no,
                        message: format!("duplicate NORAD id {norad_id}; keeping the later entry"),
                    });
                }
                catalog.upsert(record, &options.thresholds);
            }
            Err(source) => {
                let line = if source.data_line() == 1 { *l1_no } else { *l2_no };
                if fail_fast {
                    return Err(CatalogError::Parse { line, source });
                }
                diagnostics.push(Diagnostic {
                    line,
                    message: source.to_string(),
                });
            }
        }
    }

    Ok(CatalogLoad {
        catalog,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NEOSSAT: [&str; 3] = [
        "0 NEOSSAT",
        "1 39089U 13009D   18115.60454839 +.00000035 +00000-0 +27923-4 0  9992",
        "2 39089 098.5303 320.4424 0012356 092.9866 267.2733 14.34421818270178",
    ];

    fn neossat() -> TleRecord {
        TleRecord::parse(NEOSSAT[0], NEOSSAT[1], NEOSSAT[2]).unwrap()
    }

    #[test]
    fn parses_neossat_fields() {
        let r = neossat();
        assert_eq!(r.name, "NEOSSAT");
        assert_eq!(r.norad_id, 39089);
        assert_eq!(r.classification, 'U');
        assert_eq!(r.international_designator, "13009D");
        assert_eq!(r.epoch_year, 18);
        assert_eq!(r.epoch_day, 115.60454839);
        assert_eq!(r.inclination_deg, 98.5303);
        assert_eq!(r.raan_deg, 320.4424);
        assert_eq!(r.eccentricity, 0.0012356);
        assert_eq!(r.arg_perigee_deg, 92.9866);
        assert_eq!(r.mean_anomaly_deg, 267.2733);
        assert_eq!(r.mean_motion_rev_per_day, 14.34421818);
        assert_eq!(r.rev_number, 27017);
        assert_eq!(r.mean_motion_dot, 0.00000035);
        assert!((r.b_star.value() - 0.27923e-4).abs() < 1e-18);
        assert_eq!(r.element_set_number, 999);
        assert_eq!(r.full_epoch_year(), 2018);
    }

    #[test]
    fn neossat_round_trips_byte_identical() {
        let (l1, l2) = neossat().format_lines();
        assert_eq!(l1, NEOSSAT[1]);
        assert_eq!(l2, NEOSSAT[2]);
    }

    #[test]
    fn blank_padded_style_round_trips() {
        let l1 = "1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927";
        let l2 = "2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537";
        let r = TleRecord::parse("ISS (ZARYA)", l1, l2).unwrap();
        assert_eq!(r.mean_motion_dot, -0.00002182);
        assert_eq!(r.b_star.mantissa, -11606);
        let (f1, f2) = r.format_lines();
        assert_eq!(f1, l1);
        assert_eq!(f2, l2);
    }

    #[test]
    fn perturbed_checksum_digit_rejected() {
        let mut bad = NEOSSAT[2].to_string();
        bad.replace_range(68..69, "9");
        let err = TleRecord::parse(NEOSSAT[0], NEOSSAT[1], &bad).unwrap_err();
        assert_eq!(
            err,
            TleError::Checksum {
                line: 2,
                expected: 8,
                found: '9'
            }
        );
    }

    #[test]
    fn every_single_digit_perturbation_is_rejected() {
        for (line_no, line) in [(1u8, NEOSSAT[1]), (2, NEOSSAT[2])] {
            for (pos, ch) in line.char_indices() {
                let Some(d) = ch.to_digit(10) else { continue };
                for delta in 1..10 {
                    let mut bytes = line.as_bytes().to_vec();
                    bytes[pos] = b'0' + ((d + delta) % 10) as u8;
                    let mutated = String::from_utf8(bytes).unwrap();
                    let (a, b) = if line_no == 1 {
                        (mutated.as_str(), NEOSSAT[2])
                    } else {
                        (NEOSSAT[1], mutated.as_str())
                    };
                    assert!(
                        TleRecord::parse("X", a, b).is_err(),
                        "line {line_no} col {pos} +{delta} accepted"
                    );
                }
            }
        }
    }

    #[test]
    fn short_line_is_length_error() {
        let err = TleRecord::parse("", &NEOSSAT[1][..60], NEOSSAT[2]).unwrap_err();
        assert!(matches!(err, TleError::LineLength { line: 1, found: 60, .. }));
    }

    #[test]
    fn bad_numeric_field_reported() {
        let mut l2 = NEOSSAT[2].to_string();
        l2.replace_range(8..16, "09x.5303");
        let c = checksum(&l2);
        l2.replace_range(68..69, &c.to_string());
        let err = TleRecord::parse("", NEOSSAT[1], &l2).unwrap_err();
        assert!(matches!(err, TleError::Field { line: 2, field: "inclination", .. }));
    }

    #[test]
    fn epoch_pivot() {
        let mut r = neossat();
        r.epoch_year = 57;
        assert_eq!(r.full_epoch_year(), 1957);
        r.epoch_year = 56;
        assert_eq!(r.full_epoch_year(), 2056);
        assert_eq!(neossat().epoch().to_iso8601(), "2018-04-25T14:30:32.981Z");
    }

    #[test]
    fn neossat_is_leo() {
        let r = neossat();
        // Kepler's third law evaluated by hand: a = (mu / n^2)^(1/3).
        let n = 14.34421818 * 2.0 * std::f64::consts::PI / 86400.0;
        let a = (398600.4418f64 / (n * n)).powf(1.0 / 3.0);
        assert!((r.semi_major_axis_km() - a).abs() < 1e-9);
        assert!((a - 7155.125).abs() < 1e-3, "a = {a}");
        assert_eq!(classify_regime(&r, &RegimeThresholds::default()), OrbitRegime::Leo);
    }

    #[test]
    fn geo_and_heo_classification() {
        let mut r = neossat();
        r.mean_motion_rev_per_day = 1.00273;
        r.eccentricity = 0.0001;
        assert!((r.semi_major_axis_km() - 42164.0).abs() < 5.0);
        assert_eq!(classify_regime(&r, &RegimeThresholds::default()), OrbitRegime::Geo);

        r.mean_motion_rev_per_day = 2.0;
        r.eccentricity = 0.74;
        assert_eq!(classify_regime(&r, &RegimeThresholds::default()), OrbitRegime::Heo);

        r.mean_motion_rev_per_day = 2.005;
        r.eccentricity = 0.001;
        assert_eq!(classify_regime(&r, &RegimeThresholds::default()), OrbitRegime::Meo);
    }

    #[test]
    fn thresholds_are_overridable() {
        let r = neossat();
        let t = RegimeThresholds {
            leo_max_apogee_altitude_km: 500.0,
            ..Default::default()
        };
        assert_eq!(classify_regime(&r, &t), OrbitRegime::Meo);
    }

    #[test]
    fn load_single_block() {
        let text = NEOSSAT.join("\n");
        let load = load_catalog(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(load.catalog.len(), 1);
        assert_eq!(load.catalog.bucket(OrbitRegime::Leo), &[0]);
        assert!(load.diagnostics.is_empty());
    }

    #[test]
    fn load_empty_is_error() {
        let err = load_catalog("\n  \n".as_bytes(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CatalogError::Empty));
    }

    #[test]
    fn two_line_format_detected() {
        let text = format!("{}\n{}\n", NEOSSAT[1], NEOSSAT[2]);
        let load = load_catalog(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(load.catalog.records()[0].name, "39089");
    }

    #[test]
    fn duplicate_policy() {
        let text = format!("{}\n{}\n", NEOSSAT.join("\n"), NEOSSAT.join("\n"));
        let load = load_catalog(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(load.catalog.len(), 1);
        assert_eq!(load.diagnostics.len(), 1);
        assert_eq!(load.diagnostics[0].line, 5);

        let strict = LoadOptions {
            policy: ErrorPolicy::FailFast,
            ..Default::default()
        };
        let err = load_catalog(text.as_bytes(), &strict).unwrap_err();
        assert!(matches!(err, CatalogError::Duplicate { line: 5, norad_id: 39089 }));
    }

    #[test]
    fn checksum_error_carries_file_line() {
        let mut bad = NEOSSAT[2].to_string();
        bad.replace_range(68..69, "0");
        let text = format!("{}\n{}\n{}\n", NEOSSAT[0], NEOSSAT[1], bad);
        let strict = LoadOptions {
            policy: ErrorPolicy::FailFast,
            ..Default::default()
        };
        let err = load_catalog(text.as_bytes(), &strict).unwrap_err();
        assert_eq!(
            err.to_string(),
            "line:3: data line 2: checksum mismatch, expected 8 found 0"
        );
    }
}
