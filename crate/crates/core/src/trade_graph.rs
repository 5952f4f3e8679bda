// SPDX-License-Identifier: MIT OR Apache-2.0

//! Export records, revealed comparative advantage, and binary country–product
//! snapshots.
//!
//! Input files are comma-separated with the header `year,country,product,value`.
//! Country and product identifiers are opaque strings; every ordering in this
//! module is lexicographic by identifier so that identical input yields
//! identical snapshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read};
use std::ops::RangeInclusive;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_RCA_THRESHOLD: f64 = 1.0;

const HEADER: [&str; 4] = ["year", "country", "product", "value"];

#[derive(Clone, Debug, PartialEq)]
pub struct ExportRecord {
    pub year: i32,
    pub country: String,
    pub product: String,
    pub value: f64,
}

/// Aggregated export records, unique per `(year, country, product)`.
#[derive(Clone, Debug)]
pub struct ExportTable {
    records: Vec<ExportRecord>,
    products: Vec<String>,
}

impl ExportTable {
    /// Builds a table from raw records, summing duplicate keys.
    pub fn from_records(records: impl IntoIterator<Item = ExportRecord>) -> Result<Self> {
        let mut merged: BTreeMap<(i32, String, String), f64> = BTreeMap::new();
        for r in records {
            if !r.value.is_finite() || r.value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "export value for ({}, {}, {}) must be finite and non-negative, got {}",
                    r.year, r.country, r.product, r.value
                )));
            }
            *merged.entry((r.year, r.country, r.product)).or_insert(0.0) += r.value;
        }
        let products: BTreeSet<String> = merged.keys().map(|(_, _, p)| p.clone()).collect();
        let records = merged
            .into_iter()
            .map(|((year, country, product), value)| ExportRecord {
                year,
                country,
                product,
                value,
            })
            .collect();
        Ok(Self {
            records,
            products: products.into_iter().collect(),
        })
    }

    pub fn records(&self) -> &[ExportRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Union of products over every year in the table, sorted.
    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.records.iter().map(|r| r.year).collect();
        years.dedup();
        years
    }

    /// Every country with at least one record in any year, sorted.
    pub fn countries(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.country.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    fn year_records(&self, year: i32) -> &[ExportRecord] {
        let start = self.records.partition_point(|r| r.year < year);
        let end = self.records.partition_point(|r| r.year <= year);
        &self.records[start..end]
    }
}

/// Reads an export file, keeping only records whose year lies in `years`.
pub fn load_exports(path: impl AsRef<Path>, years: RangeInclusive<i32>) -> Result<ExportTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_exports(BufReader::new(file), years)
}

pub fn read_exports<R: Read>(reader: R, years: RangeInclusive<i32>) -> Result<ExportTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Malformed {
            line: 1,
            message: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let malformed = |message: String| Error::Malformed { line, message };

        let year: i32 = row[0]
            .parse()
            .map_err(|_| malformed(format!("invalid year `{}`", &row[0])))?;
        let country = &row[1];
        let product = &row[2];
        if country.is_empty() || product.is_empty() {
            return Err(malformed("empty country or product id".into()));
        }
        let value: f64 = row[3]
            .parse()
            .map_err(|_| malformed(format!("invalid value `{}`", &row[3])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(malformed(format!(
                "export value must be finite and non-negative, got `{}`",
                &row[3]
            )));
        }
        if years.contains(&year) {
            records.push(ExportRecord {
                year,
                country: country.to_owned(),
                product: product.to_owned(),
                value,
            });
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyRange {
            from: *years.start(),
            to: *years.end(),
        });
    }
    ExportTable::from_records(records)
}

/// Dense RCA values for one year. Rows follow `countries`, columns follow
/// the table-wide `products`.
#[derive(Clone, Debug)]
pub struct RcaMatrix {
    pub year: i32,
    pub countries: Vec<String>,
    pub products: Vec<String>,
    pub values: Array2<f64>,
}

impl RcaMatrix {
    pub fn get(&self, country: &str, product: &str) -> Option<f64> {
        let i = self
            .countries
            .binary_search_by(|c| c.as_str().cmp(country))
            .ok()?;
        let a = self.products.binary_search_by(|p| p.as_str().cmp(product)).ok()?;
        Some(self.values[[i, a]])
    }
}

/// Balassa RCA: the country's share of the product's world exports divided by
/// the country's share of all world exports. Pairs whose product total or
/// country total is zero get RCA 0.
pub fn compute_rca(table: &ExportTable, year: i32) -> Result<RcaMatrix> {
    let recs = table.year_records(year);
    if recs.is_empty() {
        return Err(Error::YearAbsent(year));
    }
    let products = table.products().to_vec();
    let countries: Vec<String> = recs
        .iter()
        .map(|r| r.country.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();

    let mut exports = Array2::<f64>::zeros((countries.len(), products.len()));
    for r in recs {
        let i = countries.binary_search(&r.country).expect("country indexed");
        let a = products.binary_search(&r.product).expect("product indexed");
        exports[[i, a]] = r.value;
    }

    let country_totals: Vec<f64> = exports.rows().into_iter().map(|r| r.sum()).collect();
    let product_totals: Vec<f64> = exports.columns().into_iter().map(|c| c.sum()).collect();
    let world: f64 = country_totals.iter().sum();
    if world <= 0.0 {
        return Err(Error::ZeroWorldTotal(year));
    }

    let mut values = Array2::<f64>::zeros(exports.dim());
    for ((i, a), &e) in exports.indexed_iter() {
        let (ct, pt) = (country_totals[i], product_totals[a]);
        if ct > 0.0 && pt > 0.0 {
            values[[i, a]] = (e / pt) / (ct / world);
        }
    }

    Ok(RcaMatrix {
        year,
        countries,
        products,
        values,
    })
}

/// Binary snapshot with `a_{iα} = 1` iff `RCA_{iα} >= threshold`.
/// Countries left without any link are dropped.
pub fn build_snapshot(table: &ExportTable, year: i32, threshold: f64) -> Result<BipartiteSnapshot> {
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "RCA threshold must be finite, got {threshold}"
        )));
    }
    let rca = compute_rca(table, year)?;
    let rows = rca.countries.iter().zip(rca.values.rows()).map(|(c, r)| {
        let links = r
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= threshold)
            .map(|(a, _)| a)
            .collect::<Vec<_>>();
        (c.clone(), links)
    });
    let mut snapshot = BipartiteSnapshot::from_rows(year, rca.products.clone(), rows)?;
    snapshot.threshold = threshold;
    Ok(snapshot)
}

/// Read-only view of a binary country × product network.
///
/// Rows hold sorted product indices. Implemented by snapshots and by
/// counterfactual scenarios that override a single row.
pub trait Bipartite {
    fn country_count(&self) -> usize;
    fn product_count(&self) -> usize;
    fn row(&self, country: usize) -> &[usize];
    fn country_id(&self, country: usize) -> &str;
    fn product_id(&self, product: usize) -> &str;

    fn link_count(&self) -> usize {
        (0..self.country_count()).map(|i| self.row(i).len()).sum()
    }

    /// Exporter lists per product.
    fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.product_count()];
        for i in 0..self.country_count() {
            for &a in self.row(i) {
                cols[a].push(i);
            }
        }
        cols
    }
}

/// One year of the trade network after RCA filtering.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteSnapshot {
    year: i32,
    countries: Vec<String>,
    products: Vec<String>,
    rows: Vec<Vec<usize>>,
    country_degrees: Vec<usize>,
    product_degrees: Vec<usize>,
    raw_country_count: usize,
    threshold: f64,
    fingerprint: u64,
}

impl BipartiteSnapshot {
    /// Assembles a snapshot from per-country product index lists.
    ///
    /// `products` must be strictly ascending. Rows may arrive in any order;
    /// they are sorted by country id, product indices are deduplicated, and
    /// countries without links are dropped.
    pub fn from_rows(
        year: i32,
        products: Vec<String>,
        rows: impl IntoIterator<Item = (String, Vec<usize>)>,
    ) -> Result<Self> {
        if products.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "product ids must be unique and sorted".into(),
            ));
        }
        let mut rows: Vec<(String, Vec<usize>)> = rows.into_iter().collect();
        rows.sort_by(|x, y| x.0.cmp(&y.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(format!(
                "duplicate country id `{}`",
                w[0].0
            )));
        }
        let raw_country_count = rows.len();

        let mut countries = Vec::with_capacity(rows.len());
        let mut kept = Vec::with_capacity(rows.len());
        for (country, mut links) in rows {
            links.sort_unstable();
            links.dedup();
            if let Some(&bad) = links.iter().find(|&&a| a >= products.len()) {
                return Err(Error::InvalidParameter(format!(
                    "product index {bad} out of range for country `{country}`"
                )));
            }
            if !links.is_empty() {
                countries.push(country);
                kept.push(links);
            }
        }

        let mut product_degrees = vec![0; products.len()];
        for &a in kept.iter().flatten() {
            product_degrees[a] += 1;
        }
        let country_degrees = kept.iter().map(Vec::len).collect();
        let fingerprint = fingerprint(year, &countries, &products, &kept);

        Ok(Self {
            year,
            countries,
            products,
            rows: kept,
            country_degrees,
            product_degrees,
            raw_country_count,
            threshold: DEFAULT_RCA_THRESHOLD,
            fingerprint,
        })
    }

    /// Convenience constructor from `(country, product)` id pairs.
    /// Unknown product ids are an error.
    pub fn from_links<'a>(
        year: i32,
        products: Vec<String>,
        links: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut rows: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (c, p) in links {
            let a = products
                .binary_search_by(|x| x.as_str().cmp(p))
                .map_err(|_| Error::UnknownProduct(p.to_owned()))?;
            rows.entry(c.to_owned()).or_default().push(a);
        }
        Self::from_rows(year, products, rows)
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn country_degrees(&self) -> &[usize] {
        &self.country_degrees
    }

    pub fn product_degrees(&self) -> &[usize] {
        &self.product_degrees
    }

    /// Countries with records in the year, before zero-degree removal.
    pub fn raw_country_count(&self) -> usize {
        self.raw_country_count
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Content hash over year, ids and links.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn country_index(&self, id: &str) -> Option<usize> {
        self.countries.binary_search_by(|c| c.as_str().cmp(id)).ok()
    }

    pub fn product_index(&self, id: &str) -> Option<usize> {
        self.products.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    pub fn require_country(&self, id: &str) -> Result<usize> {
        self.country_index(id)
            .ok_or_else(|| Error::UnknownCountry(id.to_owned()))
    }

    pub fn has_link(&self, country: usize, product: usize) -> bool {
        self.rows[country].binary_search(&product).is_ok()
    }

    /// Dense 0/1 adjacency, countries × products.
    pub fn adjacency(&self) -> Array2<u8> {
        let mut m = Array2::zeros((self.countries.len(), self.products.len()));
        for (i, row) in self.rows.iter().enumerate() {
            for &a in row {
                m[[i, a]] = 1;
            }
        }
        m
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = SnapshotFile {
            format: SNAPSHOT_FORMAT.to_owned(),
            year: self.year,
            threshold: self.threshold,
            raw_country_count: self.raw_country_count,
            countries: self.countries.clone(),
            products: self.products.clone(),
            rows: self.rows.clone(),
        };
        let json = serde_json::to_string(&file).map_err(|e| Error::Cache(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: SnapshotFile =
            serde_json::from_slice(&bytes).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        if file.format != SNAPSHOT_FORMAT {
            return Err(Error::Cache(format!(
                "{}: unsupported format `{}`",
                path.display(),
                file.format
            )));
        }
        if file.countries.len() != file.rows.len() {
            return Err(Error::Cache(format!(
                "{}: {} countries but {} rows",
                path.display(),
                file.countries.len(),
                file.rows.len()
            )));
        }
        let mut snapshot = Self::from_rows(
            file.year,
            file.products,
            file.countries.into_iter().zip(file.rows),
        )?;
        snapshot.threshold = file.threshold;
        snapshot.raw_country_count = file.raw_country_count;
        Ok(snapshot)
    }
}

impl Bipartite for BipartiteSnapshot {
    fn country_count(&self) -> usize {
        self.countries.len()
    }

    fn product_count(&self) -> usize {
        self.products.len()
    }

    fn row(&self, country: usize) -> &[usize] {
        &self.rows[country]
    }

    fn country_id(&self, country: usize) -> &str {
        &self.countries[country]
    }

    fn product_id(&self, product: usize) -> &str {
        &self.products[product]
    }
}

const SNAPSHOT_FORMAT: &str = "tradenet-snapshot/1";

/// On-disk cache layout: one JSON object per snapshot. `rows[i]` lists the
/// product indices (into `products`) linked to `countries[i]`.
#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    format: String,
    year: i32,
    threshold: f64,
    raw_country_count: usize,
    countries: Vec<String>,
    products: Vec<String>,
    rows: Vec<Vec<usize>>,
}

fn fingerprint(year: i32, countries: &[String], products: &[String], rows: &[Vec<usize>]) -> u64 {
    let mut h = Sha256::new();
    h.update(year.to_le_bytes());
    for ids in [countries, products] {
        h.update((ids.len() as u64).to_le_bytes());
        for id in ids {
            h.update((id.len() as u64).to_le_bytes());
            h.update(id.as_bytes());
        }
    }
    for row in rows {
        h.update((row.len() as u64).to_le_bytes());
        for &a in row {
            h.update((a as u64).to_le_bytes());
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(year: i32, c: &str, p: &str, v: f64) -> ExportRecord {
        ExportRecord {
            year,
            country: c.into(),
            product: p.into(),
            value: v,
        }
    }

    fn toy_table() -> ExportTable {
        ExportTable::from_records([
            rec(2001, "A", "p", 10.0),
            rec(2001, "A", "q", 10.0),
            rec(2001, "B", "q", 5.0),
            rec(2001, "B", "r", 15.0),
        ])
        .unwrap()
    }

    #[test]
    fn duplicate_keys_are_summed() {
        let csv = "year,country,product,value\n2001,A,p,10\n2001,A,p,5\n";
        let t = read_exports(csv.as_bytes(), 2001..=2001).unwrap();
        assert_eq!(t.records(), &[rec(2001, "A", "p", 15.0)]);
    }

    #[test]
    fn identity_load() {
        let csv = "year,country,product,value\n2001,A,p,10\n2001,A,q,10\n2001,B,q,5\n2001,B,r,15\n";
        let t = read_exports(csv.as_bytes(), 2000..=2002).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.products(), &["p", "q", "r"]);
    }

    #[test]
    fn negative_value_reports_line() {
        let csv = "year,country,product,value\n2001,A,p,10\n2001,A,q,-3\n";
        match read_exports(csv.as_bytes(), 2001..=2001) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        for body in [
            "2001,A,p\n",
            "x,A,p,1\n",
            "2001,A,p,abc\n",
            "2001,,p,1\n",
            "2001,A,p,inf\n",
        ] {
            let csv = format!("year,country,product,value\n{body}");
            assert!(
                matches!(
                    read_exports(csv.as_bytes(), 2001..=2001),
                    Err(Error::Malformed { line: 2, .. })
                ),
                "{body}"
            );
        }
        let bad_header = "yr,country,product,value\n2001,A,p,1\n";
        assert!(matches!(
            read_exports(bad_header.as_bytes(), 2001..=2001),
            Err(Error::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn empty_range_is_an_error() {
        let csv = "year,country,product,value\n2001,A,p,10\n";
        assert!(matches!(
            read_exports(csv.as_bytes(), 2005..=2006),
            Err(Error::EmptyRange { from: 2005, to: 2006 })
        ));
    }

    #[test]
    fn zero_values_are_retained() {
        let csv = "year,country,product,value\n2001,A,p,10\n2001,A,q,0\n";
        let t = read_exports(csv.as_bytes(), 2001..=2001).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn rca_toy_values() {
        let rca = compute_rca(&toy_table(), 2001).unwrap();
        // independent scalar arithmetic: A has 20 of 40, p total 10, q total 15
        let world = 10.0 + 10.0 + 5.0 + 15.0;
        let a_p = (10.0 / 10.0) / (20.0 / world);
        let b_q = (5.0 / 15.0) / (20.0 / world);
        assert_eq!(a_p, 2.0);
        assert!((rca.get("A", "p").unwrap() - a_p).abs() < 1e-15);
        assert!((rca.get("B", "q").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((rca.get("B", "q").unwrap() - b_q).abs() < 1e-15);
        assert!((rca.get("A", "q").unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(rca.get("A", "r").unwrap(), 0.0);
    }

    #[test]
    fn rca_single_pair_is_one() {
        let t = ExportTable::from_records([rec(2010, "X", "y", 123.456)]).unwrap();
        assert_eq!(compute_rca(&t, 2010).unwrap().values[[0, 0]], 1.0);
    }

    #[test]
    fn rca_absent_year() {
        assert!(matches!(
            compute_rca(&toy_table(), 1999),
            Err(Error::YearAbsent(1999))
        ));
    }

    #[test]
    fn rca_zero_product_total_is_zero() {
        let t = ExportTable::from_records([
            rec(2001, "A", "p", 10.0),
            rec(2001, "A", "z", 0.0),
            rec(2001, "B", "p", 4.0),
        ])
        .unwrap();
        let rca = compute_rca(&t, 2001).unwrap();
        assert_eq!(rca.get("A", "z"), Some(0.0));
        assert_eq!(rca.get("B", "z"), Some(0.0));
    }

    #[test]
    fn zero_world_total() {
        let t = ExportTable::from_records([rec(2001, "A", "p", 0.0)]).unwrap();
        assert!(matches!(compute_rca(&t, 2001), Err(Error::ZeroWorldTotal(2001))));
    }

    #[test]
    fn toy_snapshot_links() {
        let s = build_snapshot(&toy_table(), 2001, 1.0).unwrap();
        assert_eq!(s.countries(), &["A", "B"]);
        assert_eq!(s.rows(), &[vec![0, 1], vec![2]]);
        assert_eq!(s.country_degrees(), &[2, 1]);
        assert_eq!(s.product_degrees(), &[1, 1, 1]);
    }

    #[test]
    fn uniform_values_give_complete_graph() {
        let mut recs = Vec::new();
        for c in ["A", "B", "C"] {
            for p in ["p", "q", "r", "s"] {
                recs.push(rec(2001, c, p, 7.0));
            }
        }
        let s = build_snapshot(&ExportTable::from_records(recs).unwrap(), 2001, 1.0).unwrap();
        assert_eq!(s.link_count(), 12);
    }

    #[test]
    fn country_below_threshold_everywhere_is_dropped() {
        // any country with positive exports has some RCA >= 1 (product-share
        // weighted mean of its RCA row is 1), so only zero-total rows or a
        // raised threshold leave a country without links
        let t = ExportTable::from_records([
            rec(2001, "A", "p", 100.0),
            rec(2001, "B", "q", 100.0),
            rec(2001, "C", "p", 0.0),
            rec(2001, "C", "q", 0.0),
            rec(2001, "D", "p", 50.0),
            rec(2001, "D", "q", 40.0),
        ])
        .unwrap();
        let rca = compute_rca(&t, 2001).unwrap();
        assert_eq!(rca.get("C", "p"), Some(0.0));
        let s = build_snapshot(&t, 2001, 1.0).unwrap();
        assert_eq!(s.country_index("C"), None);
        assert_eq!(s.raw_country_count(), 4);
        assert_eq!(s.countries(), &["A", "B", "D"]);

        // D: RCA_p = (50/150)/(90/290) ~ 1.07, RCA_q = (40/140)/(90/290) ~ 0.92
        let raised = build_snapshot(&t, 2001, 1.5).unwrap();
        assert_eq!(raised.country_index("D"), None);
    }

    #[test]
    fn product_universe_spans_years() {
        let t = ExportTable::from_records([rec(2001, "A", "p", 1.0), rec(2002, "A", "q", 1.0)]).unwrap();
        let s1 = build_snapshot(&t, 2001, 1.0).unwrap();
        let s2 = build_snapshot(&t, 2002, 1.0).unwrap();
        assert_eq!(s1.products(), s2.products());
        assert_eq!(s1.product_degrees(), &[1, 0]);
    }

    #[test]
    fn threshold_is_inclusive_and_configurable() {
        let s = build_snapshot(&toy_table(), 2001, 4.0 / 3.0).unwrap();
        // A–q has RCA exactly 4/3 in the same arithmetic
        let rca = compute_rca(&toy_table(), 2001).unwrap();
        let aq = rca.get("A", "q").unwrap();
        assert_eq!(s.has_link(0, 1), aq >= 4.0 / 3.0);
        assert!(s.has_link(0, 0));
        let strict = build_snapshot(&toy_table(), 2001, 2.5).unwrap();
        assert_eq!(strict.link_count(), 0);
        assert!(build_snapshot(&toy_table(), 2001, f64::NAN).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = build_snapshot(&toy_table(), 2001, 1.0).unwrap();
        let path = dir.path().join("s.json");
        s.save(&path).unwrap();
        let back = BipartiteSnapshot::load(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fingerprint(), s.fingerprint());
    }

    #[test]
    fn from_rows_validates() {
        let products = vec!["b".to_string(), "a".to_string()];
        assert!(BipartiteSnapshot::from_rows(1, products, []).is_err());
        let products = vec!["a".to_string()];
        assert!(BipartiteSnapshot::from_rows(1, products.clone(), [("X".into(), vec![3])]).is_err());
        assert!(
            BipartiteSnapshot::from_rows(1, products, [("X".into(), vec![0]), ("X".into(), vec![0])])
                .is_err()
        );
    }
}
