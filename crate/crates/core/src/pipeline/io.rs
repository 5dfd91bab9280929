//! CSV readers and writers for flows, covariates and centroids.
//!
//! Flows are long form `dest_id,origin_id,value`. Origin and destination
//! covariates are wide (`id,<var>,...`) and OD covariates long
//! (`dest_id,origin_id,<var>,...`); both carry a leading
//! `#transform: var=log,...` line declaring every variable's transform.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::design::{symmetric_difference, Covariate, CovariateTable, FlowMatrix, Transform};
use crate::error::{BadCell, Error, Result};
use crate::weights::Centroids;

const TRANSFORM_PREFIX: &str = "#transform:";
const EARTH_RADIUS_KM: f64 = 6371.0088;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn parse_err(file: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        message: message.into(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn expect_headers(rdr: &mut csv::Reader<&[u8]>, file: &str, required: &[&str]) -> Result<Vec<String>> {
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    if headers.len() < required.len() || headers[..required.len()] != *required {
        return Err(parse_err(
            file,
            format!("expected header starting with `{}`, found `{}`", required.join(","), headers.join(",")),
        ));
    }
    Ok(headers)
}

fn number(raw: &str, file: &str, line: u64, column: &str) -> Result<f64> {
    if raw.is_empty() {
        return Err(parse_err(file, format!("line {line}: missing value in column `{column}`")));
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(file, format!("line {line}: non-numeric value `{raw}` in column `{column}`")))
}

/// Reads long-form flows. Ids on both axes are sorted; every cell must be present.
pub fn read_flows(path: &Path) -> Result<FlowMatrix> {
    parse_flows(&read(path)?, &path.display().to_string())
}

pub fn parse_flows(text: &str, file: &str) -> Result<FlowMatrix> {
    let mut rdr = reader(text);
    expect_headers(&mut rdr, file, &["dest_id", "origin_id", "value"])?;
    let mut cells: HashMap<(String, String), f64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let (d, o) = (rec[0].to_string(), rec[1].to_string());
        let v = number(&rec[2], file, line, "value")?;
        if v < 0.0 {
            return Err(Error::NegativeFlow(BadCell {
                dest: d,
                origin: o,
                value: v,
            }));
        }
        if cells.insert((d.clone(), o.clone()), v).is_some() {
            return Err(Error::DuplicateId {
                what: "flows".into(),
                id: format!("{d}/{o}"),
            });
        }
    }
    let dests: Vec<String> = cells.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let origins: Vec<String> = cells.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut values = DMatrix::zeros(dests.len(), origins.len());
    for (i, d) in dests.iter().enumerate() {
        for (j, o) in origins.iter().enumerate() {
            match cells.get(&(d.clone(), o.clone())) {
                Some(&v) => values[(i, j)] = v,
                None => return Err(parse_err(file, format!("missing flow for dest `{d}`, origin `{o}`"))),
            }
        }
    }
    FlowMatrix::new(values, dests, origins)
}

/// Splits off and parses the `#transform:` line.
fn split_transforms<'a>(text: &'a str, file: &str) -> Result<(HashMap<String, Transform>, &'a str)> {
    let trimmed = text.trim_start();
    let (first, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    let decl = first
        .trim()
        .strip_prefix(TRANSFORM_PREFIX)
        .ok_or_else(|| parse_err(file, "first line must be a `#transform:` declaration"))?;
    let mut map = HashMap::new();
    for item in decl.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, t) = item
            .split_once('=')
            .ok_or_else(|| parse_err(file, format!("bad transform entry `{item}`")))?;
        if map.insert(name.trim().to_string(), t.parse::<Transform>()?).is_some() {
            return Err(Error::DuplicateColumn(name.trim().to_string()));
        }
    }
    Ok((map, rest))
}

fn transforms_for(vars: &[String], decl: &HashMap<String, Transform>, file: &str) -> Result<Vec<Transform>> {
    for name in decl.keys() {
        if !vars.contains(name) {
            return Err(parse_err(file, format!("transform declared for absent column `{name}`")));
        }
    }
    vars.iter()
        .map(|v| {
            decl.get(v)
                .copied()
                .ok_or_else(|| parse_err(file, format!("no transform declared for column `{v}`")))
        })
        .collect()
}

/// Wide covariate file for one axis (`Origin` or `Destination`).
pub fn read_unit_covariates(path: &Path, origin_axis: bool) -> Result<CovariateTable> {
    parse_unit_covariates(&read(path)?, &path.display().to_string(), origin_axis)
}

pub fn parse_unit_covariates(text: &str, file: &str, origin_axis: bool) -> Result<CovariateTable> {
    let (decl, body) = split_transforms(text, file)?;
    let mut rdr = reader(body);
    let headers = expect_headers(&mut rdr, file, &["id"])?;
    let vars = headers[1..].to_vec();
    let transforms = transforms_for(&vars, &decl, file)?;
    let mut ids = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); vars.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(parse_err(file, format!("line {line}: expected {} fields", headers.len())));
        }
        ids.push(rec[0].to_string());
        for (k, var) in vars.iter().enumerate() {
            cols[k].push(number(&rec[k + 1], file, line, var)?);
        }
    }
    let columns = vars
        .iter()
        .zip(transforms)
        .zip(cols)
        .map(|((name, t), v)| Covariate::vector(name, t, v))
        .collect();
    if origin_axis {
        CovariateTable::origin(ids, columns)
    } else {
        CovariateTable::destination(ids, columns)
    }
}

/// Long-form OD covariates over the given id orders.
pub fn read_od_covariates(path: &Path, dest_ids: &[String], origin_ids: &[String]) -> Result<CovariateTable> {
    parse_od_covariates(&read(path)?, &path.display().to_string(), dest_ids, origin_ids)
}

pub fn parse_od_covariates(text: &str, file: &str, dest_ids: &[String], origin_ids: &[String]) -> Result<CovariateTable> {
    let (decl, body) = split_transforms(text, file)?;
    let mut rdr = reader(body);
    let headers = expect_headers(&mut rdr, file, &["dest_id", "origin_id"])?;
    let vars = headers[2..].to_vec();
    let transforms = transforms_for(&vars, &decl, file)?;
    let dpos: HashMap<&str, usize> = dest_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let opos: HashMap<&str, usize> = origin_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let (n, m) = (dest_ids.len(), origin_ids.len());
    let mut mats = vec![DMatrix::from_element(n, m, f64::NAN); vars.len()];
    let mut seen = DMatrix::from_element(n, m, false);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(parse_err(file, format!("line {line}: expected {} fields", headers.len())));
        }
        let (i, j) = match (dpos.get(&rec[0]), opos.get(&rec[1])) {
            (Some(&i), Some(&j)) => (i, j),
            (None, _) => {
                return Err(Error::IdMismatch {
                    what: "OD covariate destinations".into(),
                    ids: vec![rec[0].to_string()],
                })
            }
            (_, None) => {
                return Err(Error::IdMismatch {
                    what: "OD covariate origins".into(),
                    ids: vec![rec[1].to_string()],
                })
            }
        };
        if seen[(i, j)] {
            return Err(Error::DuplicateId {
                what: "OD covariates".into(),
                id: format!("{}/{}", &rec[0], &rec[1]),
            });
        }
        seen[(i, j)] = true;
        for (k, var) in vars.iter().enumerate() {
            mats[k][(i, j)] = number(&rec[k + 2], file, line, var)?;
        }
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        let (i, j) = (pos % n, pos / n);
        return Err(parse_err(
            file,
            format!("missing OD row for dest `{}`, origin `{}`", dest_ids[i], origin_ids[j]),
        ));
    }
    let columns = vars
        .iter()
        .zip(transforms)
        .zip(mats)
        .map(|((name, t), v)| Covariate::matrix(name, t, v))
        .collect();
    CovariateTable::od(dest_ids.to_vec(), origin_ids.to_vec(), columns)
}

/// Centroids from `id,x_km,y_km`; `id,lon,lat` is accepted only with
/// `lonlat`, projected equirectangularly about the mean latitude.
pub fn read_centroids(path: &Path, lonlat: bool) -> Result<Centroids> {
    parse_centroids(&read(path)?, &path.display().to_string(), lonlat)
}

pub fn parse_centroids(text: &str, file: &str, lonlat: bool) -> Result<Centroids> {
    let mut rdr = reader(text);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let geographic = headers == ["id", "lon", "lat"];
    if geographic && !lonlat {
        return Err(parse_err(
            file,
            "longitude/latitude centroids need the lon/lat projection flag",
        ));
    }
    if !geographic && headers != ["id", "x_km", "y_km"] {
        return Err(parse_err(file, format!("expected header `id,x_km,y_km`, found `{}`", headers.join(","))));
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        ids.push(rec[0].to_string());
        coords.push([number(&rec[1], file, line, &headers[1])?, number(&rec[2], file, line, &headers[2])?]);
    }
    if geographic {
        let phi0 = (coords.iter().map(|c| c[1]).sum::<f64>() / coords.len().max(1) as f64).to_radians();
        for c in coords.iter_mut() {
            let (lon, lat) = (c[0].to_radians(), c[1].to_radians());
            *c = [EARTH_RADIUS_KM * lon * phi0.cos(), EARTH_RADIUS_KM * lat];
        }
    }
    Centroids::new(ids, coords)
}

/// Checks that two id lists hold the same set.
pub fn check_same_ids(what: &str, a: &[String], b: &[String]) -> Result<()> {
    let diff = symmetric_difference(a, b);
    if diff.is_empty() && a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::IdMismatch {
            what: what.to_string(),
            ids: diff,
        })
    }
}

fn transform_name(t: Transform) -> &'static str {
    match t {
        Transform::Log => "log",
        Transform::Identity => "identity",
        Transform::Dummy => "dummy",
    }
}

fn transform_line(table: &CovariateTable) -> String {
    let items: Vec<String> = table
        .columns()
        .iter()
        .map(|c| format!("{}={}", c.name, transform_name(c.transform)))
        .collect();
    format!("{TRANSFORM_PREFIX} {}\n", items.join(","))
}

pub fn flows_to_csv(flows: &FlowMatrix) -> String {
    let mut out = String::from("dest_id,origin_id,value\n");
    for (j, o) in flows.origin_ids().iter().enumerate() {
        for (i, d) in flows.dest_ids().iter().enumerate() {
            let _ = writeln!(out, "{d},{o},{}", flows.values()[(i, j)]);
        }
    }
    out
}

/// Serializes an origin or destination table in wide form.
pub fn unit_covariates_to_csv(table: &CovariateTable) -> String {
    let mut out = transform_line(table);
    let ids = if table.dest_ids().is_empty() { table.origin_ids() } else { table.dest_ids() };
    let names: Vec<&str> = table.columns().iter().map(|c| c.name.as_str()).collect();
    let _ = writeln!(out, "id,{}", names.join(","));
    for (r, id) in ids.iter().enumerate() {
        let vals: Vec<String> = table.columns().iter().map(|c| c.values[(r, 0)].to_string()).collect();
        let _ = writeln!(out, "{id},{}", vals.join(","));
    }
    out
}

pub fn od_covariates_to_csv(table: &CovariateTable) -> String {
    let mut out = transform_line(table);
    let names: Vec<&str> = table.columns().iter().map(|c| c.name.as_str()).collect();
    let _ = writeln!(out, "dest_id,origin_id,{}", names.join(","));
    for (j, o) in table.origin_ids().iter().enumerate() {
        for (i, d) in table.dest_ids().iter().enumerate() {
            let vals: Vec<String> = table.columns().iter().map(|c| c.values[(i, j)].to_string()).collect();
            let _ = writeln!(out, "{d},{o},{}", vals.join(","));
        }
    }
    out
}

pub fn centroids_to_csv(c: &Centroids) -> String {
    let mut out = String::from("id,x_km,y_km\n");
    for (id, p) in c.ids().iter().zip(c.coords()) {
        let _ = writeln!(out, "{id},{},{}", p[0], p[1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flows_are_sorted_and_complete() {
        let text = "dest_id,origin_id,value\nB,x,3\nA,x,1\nA,y,2\nB,y,4\n";
        let f = parse_flows(text, "flows").unwrap();
        assert_eq!(f.dest_ids(), &["A".to_string(), "B".to_string()]);
        assert_eq!(f.values()[(1, 1)], 4.0);
        let missing = "dest_id,origin_id,value\nA,x,1\nB,y,4\n";
        assert!(matches!(parse_flows(missing, "flows"), Err(Error::Parse { .. })));
    }

    #[test]
    fn negative_flow_reports_cell() {
        let text = "dest_id,origin_id,value\nA,x,1\nA,y,-2\n";
        match parse_flows(text, "flows") {
            Err(Error::NegativeFlow(c)) => assert_eq!((c.dest.as_str(), c.origin.as_str()), ("A", "y")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_missing_values() {
        assert!(matches!(
            parse_flows("dest_id,origin_id,value\nA,x,abc\n", "f"),
            Err(Error::Parse { message, .. }) if message.contains("non-numeric")
        ));
        assert!(matches!(
            parse_flows("dest_id,origin_id,value\nA,x,\n", "f"),
            Err(Error::Parse { message, .. }) if message.contains("missing")
        ));
    }

    #[test]
    fn wide_covariates_need_declarations() {
        let ok = "#transform: gdp=log,coast=identity\nid,gdp,coast\nA,10,1.5\nB,20,0\n";
        let t = parse_unit_covariates(ok, "d", false).unwrap();
        assert_eq!(t.columns()[0].transform, Transform::Log);
        assert_eq!(t.columns()[1].values[(0, 0)], 1.5);
        assert!(parse_unit_covariates("id,gdp\nA,1\n", "d", false).is_err());
        assert!(parse_unit_covariates("#transform: gdp=log\nid,gdp,coast\nA,1,2\n", "d", false).is_err());
    }

    #[test]
    fn od_long_form() {
        let dests = vec!["A".to_string(), "B".to_string()];
        let origins = vec!["x".to_string()];
        let text = "#transform: dist=log\ndest_id,origin_id,dist\nB,x,20\nA,x,10\n";
        let t = parse_od_covariates(text, "od", &dests, &origins).unwrap();
        assert_eq!(t.columns()[0].values.as_slice(), &[10.0, 20.0]);
        let short = "#transform: dist=log\ndest_id,origin_id,dist\nA,x,10\n";
        assert!(parse_od_covariates(short, "od", &dests, &origins).is_err());
    }

    #[test]
    fn centroid_headers() {
        let c = parse_centroids("id,x_km,y_km\nA,0,0\nB,3,4\n", "c", false).unwrap();
        assert_eq!(c.coords()[1], [3.0, 4.0]);
        let geo = "id,lon,lat\nA,12.0,42.0\nB,12.0,43.0\n";
        assert!(parse_centroids(geo, "c", false).is_err());
        let p = parse_centroids(geo, "c", true).unwrap();
        // one degree of latitude
        assert!(((p.coords()[1][1] - p.coords()[0][1]) - 111.195).abs() < 0.01);
    }

    #[test]
    fn writers_round_trip() {
        let text = "#transform: gdp=log,dom=dummy\nid,gdp,dom\nA,10,1\nB,20,0\n";
        let t = parse_unit_covariates(text, "d", true).unwrap();
        let again = parse_unit_covariates(&unit_covariates_to_csv(&t), "d", true).unwrap();
        assert_eq!(t, again);
    }
}
