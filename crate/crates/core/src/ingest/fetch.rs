use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Variables read by [`super::ColumnSchema::acs_2015_2019`].
pub const ACS_2015_2019_VARIABLES: &[&str] = &[
    "B01003_001E",
    "C17002_001E",
    "C17002_002E",
    "C17002_003E",
    "B25002_001E",
    "B25002_003E",
    "B23025_003E",
    "B23025_005E",
    "B15003_001E",
    "B15003_002E",
    "B15003_003E",
    "B15003_004E",
    "B15003_005E",
    "B15003_006E",
    "B15003_007E",
    "B15003_008E",
    "B15003_009E",
    "B15003_010E",
    "B15003_011E",
    "B15003_012E",
    "B15003_013E",
    "B15003_014E",
    "B15003_015E",
    "B15003_016E",
    "B02001_001E",
    "B02001_002E",
    "B02001_003E",
];

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub out_dir: PathBuf,
    pub api_key: Option<String>,
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl FetchOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        FetchOptions {
            out_dir: out_dir.into(),
            api_key: None,
            attempts: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Download block-group tables, one CSV per state, header `GEOID,<vars…>`.
/// Existing files are overwritten.
pub fn fetch_acs(
    year_span: &str,
    variable_ids: &[&str],
    state_fips: &[&str],
    endpoint: &str,
    opts: &FetchOptions,
    exec: Execution,
) -> Result<Vec<PathBuf>> {
    if variable_ids.is_empty() {
        return Err(Error::InvalidInput("no variables requested".into()));
    }
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(opts.timeout))
        .build()
        .into();
    let results = exec.install(|| {
        exec.map(state_fips, |state| {
            let url = request_url(endpoint, variable_ids, state, opts.api_key.as_deref());
            let body = get_with_retry(&agent, &url, opts)?;
            let path = opts
                .out_dir
                .join(format!("acs_{year_span}_{state}.csv"));
            write_state_csv(&body, variable_ids, &path)?;
            Ok(path)
        })
    });
    results.into_iter().collect()
}

fn request_url(endpoint: &str, vars: &[&str], state: &str, key: Option<&str>) -> String {
    let mut url = format!(
        "{}?get={}&for=block%20group:*&in=state:{state}&in=county:*&in=tract:*",
        endpoint.trim_end_matches('/'),
        vars.join(",")
    );
    if let Some(k) = key {
        url.push_str("&key=");
        url.push_str(k);
    }
    url
}

fn get_with_retry(agent: &ureq::Agent, url: &str, opts: &FetchOptions) -> Result<String> {
    let attempts = opts.attempts.max(1);
    let mut last = Error::Network(format!("no attempt made for {url}"));
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(opts.backoff * 2u32.pow(attempt - 1));
        }
        match agent.get(url).call() {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| Error::Network(e.to_string()))?;
                match status {
                    200..=299 => return Ok(body),
                    500..=599 => {
                        log::warn!("{url}: HTTP {status} (attempt {})", attempt + 1);
                        last = Error::Http { status, body };
                    }
                    _ => return Err(Error::Http { status, body }),
                }
            }
            Err(e) => {
                log::warn!("{url}: {e} (attempt {})", attempt + 1);
                last = Error::Network(e.to_string());
            }
        }
    }
    Err(last)
}

/// The API answers with a JSON array of rows, the first row being the header.
fn write_state_csv(body: &str, vars: &[&str], path: &Path) -> Result<()> {
    let rows: Vec<Vec<Value>> = serde_json::from_str(body).map_err(|e| Error::Parse {
        path: path.to_owned(),
        offset: e.column(),
        message: format!("unexpected API response: {e}"),
    })?;
    let (header, data) = rows
        .split_first()
        .ok_or_else(|| Error::EmptyInput("API returned no rows".into()))?;
    let header: Vec<String> = header.iter().map(cell).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("API response lacks column `{name}`")))
    };
    let geo = [col("state")?, col("county")?, col("tract")?, col("block group")?];
    let var_cols = vars.iter().map(|v| col(v)).collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out_header = vec!["GEOID".to_owned()];
    out_header.extend(vars.iter().map(|v| v.to_string()));
    w.write_record(&out_header).map_err(|e| csv_err(path, e))?;
    for row in data {
        let geoid: String = geo.iter().map(|&i| row.get(i).map(cell).unwrap_or_default()).collect();
        let mut rec = vec![geoid];
        rec.extend(var_cols.iter().map(|&i| row.get(i).map(cell).unwrap_or_default()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}
