//! Comma-separated file formats.
//!
//! * `census.csv`: `household_id, community_id, <covariates...>` (columns
//!   prefixed `elite_` are elite-connection covariates)
//! * `rankings.csv`: `community_id, ranker_id, household_id, rank`
//! * `survey.csv`: `household_id, community_id, y, <covariates...>`
//! * `quotas.csv`: `community_id, quota`
//! * `splits.csv`: `community_id, split` with split in `train | test | aux`

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::error::{Error, Result};
use crate::real::Real;

use super::types::{CovariateSchema, Dataset, Household, RankingScheme};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn headers(rdr: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn column(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_num<T: Real>(rec: &StringRecord, idx: usize, row: usize, name: &str) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(T::lit)
        .ok_or_else(|| Error::NonNumericCovariate {
            row,
            column: name.to_string(),
            value: raw.to_string(),
        })
}

/// Reads household covariates. Every column other than the two id columns
/// is a covariate, in header order.
pub fn load_census<T: Real>(path: impl AsRef<Path>) -> Result<(Vec<Household<T>>, CovariateSchema)> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let hdr = headers(&mut rdr, path)?;
    let id_col = column(&hdr, "household_id")?;
    let comm_col = column(&hdr, "community_id")?;
    let cov_cols: Vec<usize> = (0..hdr.len()).filter(|&i| i != id_col && i != comm_col).collect();
    let schema = CovariateSchema::from_names(cov_cols.iter().map(|&i| hdr[i].clone()).collect());
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = row + 1;
        let id = rec.get(id_col).unwrap_or("").to_string();
        if seen.insert(id.clone(), ()).is_some() {
            return Err(Error::DuplicateHouseholdId(id));
        }
        let x = cov_cols
            .iter()
            .map(|&c| parse_num(&rec, c, row, &hdr[c]))
            .collect::<Result<Vec<T>>>()?;
        out.push(Household {
            id,
            community_id: rec.get(comm_col).unwrap_or("").to_string(),
            x,
            y: None,
        });
    }
    Ok((out, schema))
}

/// Reads survey households (with expenditure `y`). Covariate columns are
/// matched to `schema` by name.
pub fn load_survey<T: Real>(path: impl AsRef<Path>, schema: &CovariateSchema) -> Result<Vec<Household<T>>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let hdr = headers(&mut rdr, path)?;
    let id_col = column(&hdr, "household_id")?;
    let comm_col = column(&hdr, "community_id")?;
    let y_col = column(&hdr, "y")?;
    let cov_cols = schema
        .names
        .iter()
        .map(|n| column(&hdr, n))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = row + 1;
        let id = rec.get(id_col).unwrap_or("").to_string();
        if seen.insert(id.clone(), ()).is_some() {
            return Err(Error::DuplicateHouseholdId(id));
        }
        let x = cov_cols
            .iter()
            .map(|&c| parse_num(&rec, c, row, &hdr[c]))
            .collect::<Result<Vec<T>>>()?;
        out.push(Household {
            id,
            community_id: rec.get(comm_col).unwrap_or("").to_string(),
            x,
            y: Some(parse_num(&rec, y_col, row, "y")?),
        });
    }
    Ok(out)
}

/// Reads rankings, one scheme per `(community, ranker)` pair, in file order
/// of first appearance.
pub fn load_rankings<T: Real>(path: impl AsRef<Path>, census: &[Household<T>]) -> Result<Vec<RankingScheme>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let hdr = headers(&mut rdr, path)?;
    let cols = ["community_id", "ranker_id", "household_id", "rank"]
        .iter()
        .map(|n| column(&hdr, n))
        .collect::<Result<Vec<_>>>()?;
    let community_of: HashMap<&str, &str> = census
        .iter()
        .map(|h| (h.id.as_str(), h.community_id.as_str()))
        .collect();
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), BTreeMap<String, usize>> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let get = |i: usize| rec.get(cols[i]).unwrap_or("").to_string();
        let (community, ranker, household) = (get(0), get(1), get(2));
        let rank_raw = get(3);
        let rank: usize = rank_raw.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            message: format!("row {}: rank {rank_raw:?} is not a positive integer", row + 1),
        })?;
        match community_of.get(household.as_str()) {
            None => return Err(Error::UnknownHousehold(household)),
            Some(&c) if c != community => {
                return Err(Error::CommunityMismatch {
                    household,
                    expected: c.to_string(),
                    found: community,
                })
            }
            Some(_) => {}
        }
        let key = (community, ranker);
        let group = groups.entry(key.clone()).or_insert_with(|| {
            keys.push(key.clone());
            BTreeMap::new()
        });
        if group.insert(household.clone(), rank).is_some() {
            return Err(Error::NotAPermutation {
                community: key.0,
                ranker: key.1,
                n: group.len(),
            });
        }
    }
    keys.into_iter()
        .map(|k| {
            let ranks = groups.remove(&k).expect("key recorded");
            RankingScheme::new(k.0, k.1, ranks)
        })
        .collect()
}

pub fn load_quotas(path: impl AsRef<Path>) -> Result<BTreeMap<String, usize>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let hdr = headers(&mut rdr, path)?;
    let c = column(&hdr, "community_id")?;
    let q = column(&hdr, "quota")?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let raw = rec.get(q).unwrap_or("");
        let quota = raw.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            message: format!("quota {raw:?} is not a non-negative integer"),
        })?;
        out.insert(rec.get(c).unwrap_or("").to_string(), quota);
    }
    Ok(out)
}

/// Reads `community_id, split` labels.
pub fn load_splits(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let hdr = headers(&mut rdr, path)?;
    let c = column(&hdr, "community_id")?;
    let s = column(&hdr, "split")?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        out.insert(
            rec.get(c).unwrap_or("").to_string(),
            rec.get(s).unwrap_or("").to_string(),
        );
    }
    Ok(out)
}

/// Loads census, rankings, quotas and (optionally) survey files into one dataset.
/// Survey rows whose id matches a census household attach `y` to it; other
/// survey rows become additional households.
pub fn load_dataset<T: Real>(
    census: impl AsRef<Path>,
    rankings: impl AsRef<Path>,
    quotas: Option<&Path>,
    survey: Option<&Path>,
) -> Result<Dataset<T>> {
    let (mut households, schema) = load_census::<T>(census)?;
    let rankings = load_rankings(rankings, &households)?;
    if let Some(s) = survey {
        let index: HashMap<String, usize> = households
            .iter()
            .enumerate()
            .map(|(i, h)| (h.id.clone(), i))
            .collect();
        for sh in load_survey::<T>(s, &schema)? {
            match index.get(&sh.id) {
                Some(&i) => {
                    if households[i].community_id != sh.community_id {
                        return Err(Error::CommunityMismatch {
                            household: sh.id,
                            expected: households[i].community_id.clone(),
                            found: sh.community_id,
                        });
                    }
                    households[i].y = sh.y;
                }
                None => households.push(sh),
            }
        }
    }
    let quotas = match quotas {
        Some(q) => load_quotas(q)?,
        None => BTreeMap::new(),
    };
    Dataset::new(households, rankings, quotas, schema)
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(WriterBuilder::new().from_writer(f))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt<T: Real>(v: T) -> String {
    format!("{}", v.as_f64())
}

/// Writes covariates of every household (census format).
pub fn write_census<T: Real>(path: impl AsRef<Path>, households: &[Household<T>], schema: &CovariateSchema) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut hdr = vec!["household_id".to_string(), "community_id".to_string()];
    hdr.extend(schema.names.iter().cloned());
    w.write_record(&hdr).map_err(|e| Error::csv(path, e))?;
    for h in households {
        let mut rec = vec![h.id.clone(), h.community_id.clone()];
        rec.extend(h.x.iter().map(|&v| fmt(v)));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Writes households that carry expenditure (survey format).
pub fn write_survey<T: Real>(path: impl AsRef<Path>, households: &[Household<T>], schema: &CovariateSchema) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut hdr = vec!["household_id".to_string(), "community_id".to_string(), "y".to_string()];
    hdr.extend(schema.names.iter().cloned());
    w.write_record(&hdr).map_err(|e| Error::csv(path, e))?;
    for h in households {
        if let Some(y) = h.y {
            let mut rec = vec![h.id.clone(), h.community_id.clone(), fmt(y)];
            rec.extend(h.x.iter().map(|&v| fmt(v)));
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_rankings(path: impl AsRef<Path>, rankings: &[RankingScheme]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["community_id", "ranker_id", "household_id", "rank"])
        .map_err(|e| Error::csv(path, e))?;
    for s in rankings {
        for (pos, h) in s.order().iter().enumerate() {
            w.write_record([&s.community_id, &s.ranker_id, *h, &(pos + 1).to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_quotas(path: impl AsRef<Path>, quotas: &BTreeMap<String, usize>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["community_id", "quota"]).map_err(|e| Error::csv(path, e))?;
    for (c, q) in quotas {
        w.write_record([c, &q.to_string()]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn write_splits(path: impl AsRef<Path>, splits: &BTreeMap<String, String>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["community_id", "split"]).map_err(|e| Error::csv(path, e))?;
    for (c, s) in splits {
        w.write_record([c, s]).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Writes any header + rows table; used for result files.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Reads a whole table as (header, rows) of strings.
pub fn read_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let hdr = headers(&mut rdr, path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((hdr, rows))
}

/// Writes bytes to `path` through a temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
