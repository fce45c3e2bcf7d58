//! Readers and writers for the files handed between stages.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use depriv_core::model::{BlockGroupRecord, Geoid, RegionSummary, ScoredBlockGroup};
use depriv_core::{Error, Result};
use serde::Serialize;

pub const SCORES: &str = "scores.csv";
pub const WEIGHTS: &str = "weights.json";
pub const QUARANTINE: &str = "quarantine.jsonl";
pub const CLASSIFIED: &str = "classified.csv";
pub const CLASSIFY_JSON: &str = "classify.json";
pub const ADJACENCY: &str = "adjacency.csv";
pub const DISPERSION_JSON: &str = "dispersion.json";

pub const REGION_HEADER: [&str; 11] = [
    "region_id",
    "region_kind",
    "n_bg",
    "median_score",
    "pct_high",
    "dispersion",
    "percpov",
    "popdens",
    "percblk",
    "percwht",
    "population",
];

/// Fixed 3-decimal formatting; negative zero prints as zero.
pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn fmt3_opt(v: Option<f64>) -> String {
    v.map(fmt3).unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_owned(),
            offset,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        offset: e.column(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "{}: expected header {}, found {}",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))
}

fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Schema(format!("{}: `{field}` is not a number", path.display())))
}

pub fn write_scores(path: &Path, scored: &[ScoredBlockGroup]) -> Result<()> {
    write_csv(
        path,
        &["geoid", "raw_score", "score"],
        scored
            .iter()
            .map(|s| [s.geoid.to_string(), s.raw_score.to_string(), s.score.to_string()]),
    )
}

pub fn write_classified(path: &Path, scored: &[ScoredBlockGroup]) -> Result<()> {
    write_csv(
        path,
        &["geoid", "raw_score", "score", "high"],
        scored.iter().map(|s| {
            [
                s.geoid.to_string(),
                s.raw_score.to_string(),
                s.score.to_string(),
                u8::from(s.high_deprivation).to_string(),
            ]
        }),
    )
}

fn read_scored(path: &Path, classified: bool) -> Result<BTreeMap<Geoid, ScoredBlockGroup>> {
    let header: &[&str] = if classified {
        &["geoid", "raw_score", "score", "high"]
    } else {
        &["geoid", "raw_score", "score"]
    };
    let mut out = BTreeMap::new();
    for row in read_rows(path, header)? {
        let geoid = Geoid::parse(&row[0])
            .map_err(|_| Error::Schema(format!("{}: bad geoid `{}`", path.display(), &row[0])))?;
        let high = classified && &row[3] == "1";
        out.insert(
            geoid.clone(),
            ScoredBlockGroup {
                geoid,
                raw_score: parse_f64(path, &row[1])?,
                score: parse_f64(path, &row[2])?,
                high_deprivation: high,
            },
        );
    }
    Ok(out)
}

/// Scores aligned with `records`; every record must have exactly one row.
pub fn load_scores(path: &Path, records: &[BlockGroupRecord], classified: bool) -> Result<Vec<ScoredBlockGroup>> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run the previous stage first"),
        ));
    }
    let mut by_geoid = read_scored(path, classified)?;
    let aligned = records
        .iter()
        .map(|r| {
            by_geoid.remove(&r.geoid).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{} has no row for {}; rerun the earlier stages",
                    path.display(),
                    r.geoid
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = by_geoid.keys().next() {
        return Err(Error::InvalidInput(format!(
            "{} has rows for unknown block groups (first: {extra})",
            path.display()
        )));
    }
    Ok(aligned)
}

pub fn region_row(s: &RegionSummary) -> [String; 11] {
    [
        s.region_id.clone(),
        s.region_kind.as_str().to_owned(),
        s.n_bg.to_string(),
        fmt3(s.median_score),
        fmt3(s.pct_high),
        fmt3_opt(s.dispersion),
        fmt3_opt(s.percpov),
        fmt3_opt(s.popdens),
        fmt3_opt(s.percblk),
        fmt3_opt(s.percwht),
        s.population.to_string(),
    ]
}

pub fn write_regions(path: &Path, summaries: &[RegionSummary]) -> Result<()> {
    write_csv(path, &REGION_HEADER, summaries.iter().map(region_row))
}

/// `region_id,geoid` membership pairs.
pub fn read_cities(path: &Path) -> Result<Vec<(String, Geoid)>> {
    read_rows(path, &["region_id", "geoid"])?
        .into_iter()
        .map(|row| {
            let g = Geoid::parse(&row[1])
                .map_err(|_| Error::Schema(format!("{}: bad geoid `{}`", path.display(), &row[1])))?;
            Ok((row[0].to_owned(), g))
        })
        .collect()
}
