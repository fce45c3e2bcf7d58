use std::collections::HashSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, QuarantineEntry, Reason};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{is_contiguous_state, BlockGroupRecord, Geoid};

/// Where a logical percent column comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnSource {
    /// Pre-computed percentage in one column.
    Column(String),
    /// `100 · Σ numerator / Σ denominator`, for count tables.
    Ratio {
        numerator: Vec<String>,
        denominator: Vec<String>,
    },
}

impl ColumnSource {
    fn column_names(&self) -> Vec<&str> {
        match self {
            ColumnSource::Column(c) => vec![c.as_str()],
            ColumnSource::Ratio {
                numerator,
                denominator,
            } => numerator
                .iter()
                .chain(denominator.iter())
                .map(String::as_str)
                .collect(),
        }
    }
}

impl From<&str> for ColumnSource {
    fn from(s: &str) -> Self {
        ColumnSource::Column(s.to_owned())
    }
}

/// Maps logical fields to CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnSchema {
    pub geoid: String,
    /// When absent the state is taken from the GEOID prefix.
    pub state_fips: Option<String>,
    pub place_id: Option<String>,
    pub percpov: ColumnSource,
    pub percvac: ColumnSource,
    pub unemp: ColumnSource,
    pub nohs: ColumnSource,
    pub population: String,
    pub popdens: Option<String>,
    pub percblk: Option<ColumnSource>,
    pub percwht: Option<ColumnSource>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            geoid: "geoid".into(),
            state_fips: None,
            place_id: Some("place_id".into()),
            percpov: "percpov".into(),
            percvac: "percvac".into(),
            unemp: "unemp".into(),
            nohs: "nohs".into(),
            population: "population".into(),
            popdens: Some("popdens".into()),
            percblk: Some("percblk".into()),
            percwht: Some("percwht".into()),
        }
    }
}

impl ColumnSchema {
    /// Derivation mapping over raw ACS 2015–2019 block-group count tables, as
    /// written by [`super::fetch_acs`] with [`super::ACS_2015_2019_VARIABLES`].
    /// Place membership and density are not published at block-group level.
    pub fn acs_2015_2019() -> Self {
        let ids = |r: std::ops::RangeInclusive<u32>, table: &str| -> Vec<String> {
            r.map(|i| format!("{table}_{i:03}E")).collect()
        };
        ColumnSchema {
            geoid: "GEOID".into(),
            state_fips: None,
            place_id: None,
            percpov: ColumnSource::Ratio {
                numerator: ids(2..=3, "C17002"),
                denominator: vec!["C17002_001E".into()],
            },
            percvac: ColumnSource::Ratio {
                numerator: vec!["B25002_003E".into()],
                denominator: vec!["B25002_001E".into()],
            },
            unemp: ColumnSource::Ratio {
                numerator: vec!["B23025_005E".into()],
                denominator: vec!["B23025_003E".into()],
            },
            nohs: ColumnSource::Ratio {
                numerator: ids(2..=16, "B15003"),
                denominator: vec!["B15003_001E".into()],
            },
            population: "B01003_001E".into(),
            popdens: None,
            percblk: Some(ColumnSource::Ratio {
                numerator: vec!["B02001_003E".into()],
                denominator: vec!["B02001_001E".into()],
            }),
            percwht: Some(ColumnSource::Ratio {
                numerator: vec!["B02001_002E".into()],
                denominator: vec!["B02001_001E".into()],
            }),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept Alaska, Hawaii and territories instead of quarantining them.
    pub include_noncontiguous: bool,
}

enum Source {
    Column(usize),
    Ratio(Vec<usize>, Vec<usize>),
}

struct Resolved {
    geoid: usize,
    state_fips: Option<usize>,
    place_id: Option<usize>,
    components: [Source; 4],
    population: usize,
    popdens: Option<usize>,
    percblk: Option<Source>,
    percwht: Option<Source>,
}

fn resolve(schema: &ColumnSchema, header: &[String]) -> Result<Resolved> {
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("header has no column `{name}`")))
    };
    let source = |s: &ColumnSource| -> Result<Source> {
        match s {
            ColumnSource::Column(c) => Ok(Source::Column(find(c)?)),
            ColumnSource::Ratio {
                numerator,
                denominator,
            } => {
                if numerator.is_empty() || denominator.is_empty() {
                    return Err(Error::Schema(format!(
                        "ratio mapping needs numerator and denominator: {:?}",
                        s.column_names()
                    )));
                }
                Ok(Source::Ratio(
                    numerator.iter().map(|c| find(c)).collect::<Result<_>>()?,
                    denominator.iter().map(|c| find(c)).collect::<Result<_>>()?,
                ))
            }
        }
    };
    Ok(Resolved {
        geoid: find(&schema.geoid)?,
        state_fips: schema.state_fips.as_deref().map(find).transpose()?,
        place_id: schema.place_id.as_deref().map(find).transpose()?,
        components: [
            source(&schema.percpov)?,
            source(&schema.percvac)?,
            source(&schema.unemp)?,
            source(&schema.nohs)?,
        ],
        population: find(&schema.population)?,
        popdens: schema.popdens.as_deref().map(find).transpose()?,
        percblk: schema.percblk.as_ref().map(source).transpose()?,
        percwht: schema.percwht.as_ref().map(source).transpose()?,
    })
}

fn field(row: &csv::ByteRecord, idx: usize) -> Option<&str> {
    row.get(idx)
        .and_then(|b| std::str::from_utf8(b).ok())
        .map(str::trim)
}

fn number(row: &csv::ByteRecord, idx: usize) -> Result<f64, Reason> {
    field(row, idx)
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .ok_or(Reason::NonNumeric)
}

fn percent(row: &csv::ByteRecord, src: &Source) -> Result<f64, Reason> {
    let value = match src {
        Source::Column(i) => number(row, *i)?,
        Source::Ratio(num, den) => {
            let n: f64 = num.iter().map(|&i| number(row, i)).sum::<Result<f64, _>>()?;
            let d: f64 = den.iter().map(|&i| number(row, i)).sum::<Result<f64, _>>()?;
            if d == 0.0 {
                return Err(Reason::ZeroDenominator);
            }
            100.0 * n / d
        }
    };
    if (0.0..=100.0).contains(&value) {
        Ok(value)
    } else {
        Err(Reason::OutOfRange)
    }
}

fn optional_percent(row: &csv::ByteRecord, src: Option<&Source>) -> Result<Option<f64>, Reason> {
    match src {
        None => Ok(None),
        Some(Source::Column(i)) if field(row, *i).is_none_or(str::is_empty) => Ok(None),
        Some(s) => percent(row, s).map(Some),
    }
}

fn parse_row(
    row: &csv::ByteRecord,
    cols: &Resolved,
    opts: &ParseOptions,
) -> Result<BlockGroupRecord, Reason> {
    let geoid = field(row, cols.geoid)
        .and_then(|s| Geoid::parse(s).ok())
        .ok_or(Reason::BadGeoid)?;
    let state_fips = geoid.state_fips().to_owned();
    if let Some(i) = cols.state_fips {
        let given = field(row, i).ok_or(Reason::BadGeoid)?;
        if given != state_fips {
            return Err(Reason::BadGeoid);
        }
    }
    if !opts.include_noncontiguous && !is_contiguous_state(&state_fips) {
        return Err(Reason::NoncontiguousState);
    }
    let place_id = cols
        .place_id
        .and_then(|i| field(row, i))
        .filter(|s| !s.is_empty())
        .map(str::to_owned);

    let mut x = [0.0; 4];
    for (slot, src) in x.iter_mut().zip(&cols.components) {
        *slot = percent(row, src)?;
    }

    let population = number(row, cols.population)?;
    if population < 0.0 {
        return Err(Reason::OutOfRange);
    }
    if population.fract() != 0.0 || population > u64::MAX as f64 {
        return Err(Reason::NonNumeric);
    }

    let popdens = match cols.popdens.and_then(|i| field(row, i)) {
        None | Some("") => None,
        Some(_) => {
            let v = number(row, cols.popdens.unwrap())?;
            if v < 0.0 {
                return Err(Reason::OutOfRange);
            }
            Some(v)
        }
    };

    Ok(BlockGroupRecord {
        geoid,
        state_fips,
        place_id,
        percpov: x[0],
        percvac: x[1],
        unemp: x[2],
        nohs: x[3],
        population: population as u64,
        popdens,
        percblk: optional_percent(row, cols.percblk.as_ref())?,
        percwht: optional_percent(row, cols.percwht.as_ref())?,
    })
}

fn raw_line(row: &csv::ByteRecord) -> String {
    row.iter()
        .map(String::from_utf8_lossy)
        .collect::<Vec<_>>()
        .join(",")
}

/// Parse an attribute table from any reader. Records come back sorted by
/// geoid; a repeated geoid keeps the first row.
pub fn parse_attributes_reader<R: Read>(
    reader: R,
    source: &str,
    schema: &ColumnSchema,
    opts: &ParseOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut rows = rdr.byte_records();
    let header = match rows.next() {
        None => return Err(Error::EmptyInput(format!("{source}: no header row"))),
        Some(Err(e)) => return Err(csv_fatal(source, e)),
        Some(Ok(h)) => h
            .iter()
            .map(|b| String::from_utf8_lossy(b).trim_start_matches('\u{feff}').to_owned())
            .collect::<Vec<_>>(),
    };
    let cols = resolve(schema, &header)?;

    let mut records = Vec::new();
    let mut quarantine = Vec::new();
    let mut seen = HashSet::new();
    for row in rows {
        let row = match row {
            Ok(r) => r,
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(csv_fatal(source, e)),
                _ => {
                    let line = e.position().map_or(0, |p| p.line());
                    quarantine.push(QuarantineEntry {
                        source: source.to_owned(),
                        line,
                        reason: Reason::NonNumeric,
                        raw: e.to_string(),
                    });
                    continue;
                }
            },
        };
        let line = row.position().map_or(0, |p| p.line());
        let outcome = parse_row(&row, &cols, opts).and_then(|rec| {
            if seen.insert(rec.geoid.clone()) {
                Ok(rec)
            } else {
                Err(Reason::DuplicateGeoid)
            }
        });
        match outcome {
            Ok(rec) => records.push(rec),
            Err(reason) => quarantine.push(QuarantineEntry {
                source: source.to_owned(),
                line,
                reason,
                raw: raw_line(&row),
            }),
        }
    }
    records.sort_by(|a, b| a.geoid.cmp(&b.geoid));
    Ok(Dataset {
        records,
        geometries: None,
        provenance: format!("attributes: {source}"),
        quarantine,
    })
}

fn csv_fatal(source: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(source, io),
        other => Error::Schema(format!("{source}: {other:?}")),
    }
}

pub fn parse_attributes_csv(
    path: &Path,
    schema: &ColumnSchema,
    opts: &ParseOptions,
) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_attributes_reader(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        schema,
        opts,
    )
}

/// Parse several files (e.g. one per state) and merge them. The merge walks
/// files in the given order, so the result does not depend on `exec`.
pub fn parse_attributes_files(
    paths: &[PathBuf],
    schema: &ColumnSchema,
    opts: &ParseOptions,
    exec: Execution,
) -> Result<Dataset> {
    let parsed: Vec<Result<Dataset>> =
        exec.install(|| exec.map(paths, |p| parse_attributes_csv(p, schema, opts)));
    let mut merged = Dataset::default();
    let mut seen = HashSet::new();
    let mut sources = Vec::new();
    for (path, part) in paths.iter().zip(parsed) {
        let part = part?;
        sources.push(path.display().to_string());
        merged.quarantine.extend(part.quarantine);
        for rec in part.records {
            if seen.insert(rec.geoid.clone()) {
                merged.records.push(rec);
            } else {
                merged.quarantine.push(QuarantineEntry {
                    source: path.display().to_string(),
                    line: 0,
                    reason: Reason::DuplicateGeoid,
                    raw: rec.geoid.to_string(),
                });
            }
        }
    }
    merged.records.sort_by(|a, b| a.geoid.cmp(&b.geoid));
    merged.provenance = format!("attributes: {}", sources.join(", "));
    Ok(merged)
}
