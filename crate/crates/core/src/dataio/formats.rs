use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, TrendSeries};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    #[serde(rename = "geostyle-raw")]
    GeoStyleRaw,
    #[serde(rename = "trendkern-json")]
    TrendKernJson,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geostyle-raw" => Ok(Self::GeoStyleRaw),
            "trendkern-json" => Ok(Self::TrendKernJson),
            other => Err(Error::Config(format!(
                "unknown dataset format '{other}' (expected geostyle-raw or trendkern-json)"
            ))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GeoStyleRaw => "geostyle-raw",
            Self::TrendKernJson => "trendkern-json",
        })
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    match format {
        DatasetFormat::TrendKernJson => parse_trendkern_json(&text, &context),
        DatasetFormat::GeoStyleRaw => parse_geostyle_csv(&text, &context).map(|g| g.dataset),
    }
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_trendkern_json(dataset)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// trendkern-json
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonFile {
    group_vocab_size: usize,
    element_vocab_size: usize,
    #[serde(default)]
    bin_duration: Option<String>,
    series: Vec<JsonSeries>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSeries {
    series_id: usize,
    group_id: usize,
    element_id: usize,
    values: Vec<JsonValue>,
}

/// Numbers, or the spellings other JSON writers use for non-finite floats.
#[derive(Deserialize)]
#[serde(untagged)]
enum JsonValue {
    Number(f64),
    Text(String),
}

#[derive(Serialize)]
struct JsonSeriesOut<'a> {
    series_id: usize,
    group_id: usize,
    element_id: usize,
    values: &'a [f64],
}

pub fn parse_trendkern_json(text: &str, context: &str) -> Result<Dataset> {
    let raw: JsonFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;

    let mut series = Vec::with_capacity(raw.series.len());
    for (record, s) in raw.series.into_iter().enumerate() {
        let mut values = Vec::with_capacity(s.values.len());
        for (i, v) in s.values.into_iter().enumerate() {
            values.push(match v {
                JsonValue::Number(x) => x,
                JsonValue::Text(t) => match t.as_str() {
                    "NaN" | "nan" => f64::NAN,
                    "Infinity" | "inf" => f64::INFINITY,
                    "-Infinity" | "-inf" => f64::NEG_INFINITY,
                    _ => {
                        return Err(Error::Parse {
                            context: context.to_string(),
                            location: format!("series record {record}, value {i}"),
                            message: format!("expected a number, got string '{t}'"),
                        })
                    }
                },
            });
        }
        series.push(TrendSeries {
            series_id: s.series_id,
            group_id: s.group_id,
            element_id: s.element_id,
            values,
        });
    }
    Dataset::new(
        series,
        raw.group_vocab_size,
        raw.element_vocab_size,
        raw.bin_duration.unwrap_or_else(|| "week".to_string()),
    )
}

/// One header block, then one series object per line.
pub fn to_trendkern_json(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"group_vocab_size\": {},\n", dataset.group_vocab_size));
    out.push_str(&format!("  \"element_vocab_size\": {},\n", dataset.element_vocab_size));
    out.push_str(&format!(
        "  \"bin_duration\": {},\n",
        serde_json::to_string(&dataset.bin_duration).expect("string serializes")
    ));
    out.push_str("  \"series\": [\n");
    for (i, s) in dataset.series.iter().enumerate() {
        let line = serde_json::to_string(&JsonSeriesOut {
            series_id: s.series_id,
            group_id: s.group_id,
            element_id: s.element_id,
            values: &s.values,
        })
        .expect("finite series serialize");
        out.push_str("    ");
        out.push_str(&line);
        if i + 1 < dataset.series.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ]\n}\n");
    out
}

// ---------------------------------------------------------------------------
// geostyle-raw
// ---------------------------------------------------------------------------

/// A GeoStyle export mapped onto the dataset model, with the id vocabularies.
#[derive(Clone, Debug)]
pub struct GeoStyleImport {
    pub dataset: Dataset,
    pub cities: Vec<String>,
    pub styles: Vec<String>,
    /// Time keys kept after trimming to the common range, in order.
    pub weeks: Vec<String>,
}

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

/// Long-format CSV: one row per (city, style, week).
///
/// Columns are matched by header name: `city`; `style` (or `attribute`,
/// `element`); `week` (or `date`, `time`); and either `fraction` (or
/// `positive_fraction`, `value`) or the pair `positive` + `total`.
/// Series are trimmed to the week range every series covers; a gap inside
/// that range is a validation error.
pub fn parse_geostyle_csv(text: &str, context: &str) -> Result<GeoStyleImport> {
    let parse_err = |location: String, message: String| Error::Parse {
        context: context.to_string(),
        location,
        message,
    };

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err("line 1".into(), e.to_string()))?
        .clone();
    let city_col = find_column(&headers, &["city"]);
    let style_col = find_column(&headers, &["style", "attribute", "element"]);
    let week_col = find_column(&headers, &["week", "date", "time"]);
    let frac_col = find_column(&headers, &["fraction", "positive_fraction", "value"]);
    let pos_col = find_column(&headers, &["positive"]);
    let total_col = find_column(&headers, &["total"]);
    let (Some(city_col), Some(style_col), Some(week_col)) = (city_col, style_col, week_col) else {
        return Err(parse_err(
            "line 1".into(),
            format!("header must name city, style and week columns, got {headers:?}"),
        ));
    };
    if frac_col.is_none() && (pos_col.is_none() || total_col.is_none()) {
        return Err(parse_err(
            "line 1".into(),
            "header needs a fraction column or positive and total columns".into(),
        ));
    }

    let mut cities: Vec<String> = Vec::new();
    let mut styles: Vec<String> = Vec::new();
    let mut city_ids: HashMap<String, usize> = HashMap::new();
    let mut style_ids: HashMap<String, usize> = HashMap::new();
    let mut pair_order: Vec<(usize, usize)> = Vec::new();
    let mut pair_values: HashMap<(usize, usize), HashMap<String, f64>> = HashMap::new();

    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(format!("line {line}"), e.to_string()))?;
        let field = |col: usize| {
            record
                .get(col)
                .ok_or_else(|| parse_err(format!("line {line}"), format!("missing column {col}")))
        };
        let number = |col: usize| -> Result<f64> {
            let raw = field(col)?;
            raw.parse::<f64>()
                .map_err(|_| parse_err(format!("line {line}"), format!("'{raw}' is not a number")))
        };

        let city = field(city_col)?.to_string();
        let style = field(style_col)?.to_string();
        let week = field(week_col)?.to_string();
        let value = match frac_col {
            Some(c) => number(c)?,
            None => {
                let total = number(total_col.expect("checked above"))?;
                let positive = number(pos_col.expect("checked above"))?;
                if total <= 0.0 {
                    return Err(parse_err(format!("line {line}"), "total must be positive".into()));
                }
                positive / total
            }
        };

        let g = *city_ids.entry(city.clone()).or_insert_with(|| {
            cities.push(city);
            cities.len() - 1
        });
        let e = *style_ids.entry(style.clone()).or_insert_with(|| {
            styles.push(style);
            styles.len() - 1
        });
        let values = pair_values.entry((g, e)).or_insert_with(|| {
            pair_order.push((g, e));
            HashMap::new()
        });
        if values.insert(week.clone(), value).is_some() {
            return Err(parse_err(
                format!("line {line}"),
                format!("duplicate row for ({}, {}, {week})", cities[g], styles[e]),
            ));
        }
    }
    if pair_order.is_empty() {
        return Err(parse_err("line 2".into(), "no data rows".into()));
    }

    // Order time keys numerically when every key is an integer, lexically otherwise
    // (ISO dates sort correctly as text).
    let mut weeks: Vec<String> = pair_values
        .values()
        .flat_map(|m| m.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if weeks.iter().all(|w| w.parse::<i64>().is_ok()) {
        weeks.sort_by_key(|w| w.parse::<i64>().expect("checked"));
    }
    let week_index: HashMap<&str, usize> = weeks.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();

    let mut lo = 0;
    let mut hi = usize::MAX;
    for values in pair_values.values() {
        let idx = values.keys().map(|k| week_index[k.as_str()]);
        let (min, max) = idx.fold((usize::MAX, 0), |(a, b), i| (a.min(i), b.max(i)));
        lo = lo.max(min);
        hi = hi.min(max);
    }
    if lo > hi {
        return Err(Error::Validation(format!(
            "{context}: series share no common week range"
        )));
    }
    let kept: Vec<String> = weeks[lo..=hi].to_vec();

    let mut series = Vec::with_capacity(pair_order.len());
    let mut gaps = Vec::new();
    for (series_id, &(g, e)) in pair_order.iter().enumerate() {
        let values = &pair_values[&(g, e)];
        let trimmed: Option<Vec<f64>> = kept.iter().map(|w| values.get(w).copied()).collect();
        match trimmed {
            Some(v) => series.push(TrendSeries {
                series_id,
                group_id: g,
                element_id: e,
                values: v,
            }),
            None => gaps.push(series_id),
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Validation(format!(
            "{context}: series with missing weeks inside the common range: {gaps:?}"
        )));
    }

    let dataset = Dataset::new(series, cities.len(), styles.len(), "week")?;
    Ok(GeoStyleImport {
        dataset,
        cities,
        styles,
        weeks: kept,
    })
}
